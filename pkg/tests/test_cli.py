import json

from click.testing import CliRunner

from tableqa.cli import main


def test_generate_corpus_writes_db_and_manifest(tmp_path):
    db = tmp_path / "c.sqlite"
    manifest = tmp_path / "m.json"
    result = CliRunner().invoke(
        main,
        [
            "generate-corpus",
            "--db", str(db),
            "--manifest", str(manifest),
            "--seed", "3",
            "--rows", "200",
        ],
    )
    assert result.exit_code == 0, result.output
    assert db.exists()
    payload = json.loads(manifest.read_text(encoding="utf-8"))
    assert payload["seed"] == 3
    assert "emissions_scope1" in payload["tables"]
    assert "office_registry: " in result.output


def test_generate_corpus_replaces_existing_output(tmp_path):
    db = tmp_path / "c.sqlite"
    manifest = tmp_path / "m.json"
    args = ["generate-corpus", "--db", str(db), "--manifest", str(manifest),
            "--seed", "3", "--rows", "200"]
    assert CliRunner().invoke(main, args).exit_code == 0
    result = CliRunner().invoke(main, args)
    assert result.exit_code == 0, result.output
    payload = json.loads(manifest.read_text(encoding="utf-8"))
    assert payload["tables"]["office_registry"]["rows"] > 0


def test_score_matching_bundle_exits_zero(quad_dir):
    result = CliRunner().invoke(main, ["score", str(quad_dir / "revenue_growth.json")])
    assert result.exit_code == 0, result.output
    assert "scores: [1.0, 1, 1, 1, 1]" in result.output
    assert "match" in result.output


def test_score_flags_ungrounded_number(quad_dir):
    result = CliRunner().invoke(
        main, ["score", str(quad_dir / "oncology_admissions.json")]
    )
    assert result.exit_code == 0, result.output
    assert "scores: [0.8, 1, 1, 1, 1]" in result.output
    assert "88231" in result.output


def test_score_mismatch_exits_nonzero(tmp_path, quad_dir):
    quad = json.loads((quad_dir / "revenue_growth.json").read_text(encoding="utf-8"))
    quad["expected"] = [0.0, 0, 0, 0, 0]
    path = tmp_path / "wrong.json"
    path.write_text(json.dumps(quad), encoding="utf-8")
    result = CliRunner().invoke(main, ["score", str(path)])
    assert result.exit_code == 1
    assert "MISMATCH" in result.output
