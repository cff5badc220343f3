"""Question answering over access-controlled tables, with graded answers."""

from .auth import AuthService, MinimalUserProfile, Session, TableGrant
from .config import AppConfig, load_config
from .pipeline import Application, TraceRecord
from .scoring import HallucinationScorer, ScoreVector

__version__ = "0.1.0"

__all__ = [
    "AppConfig",
    "Application",
    "AuthService",
    "HallucinationScorer",
    "MinimalUserProfile",
    "ScoreVector",
    "Session",
    "TableGrant",
    "TraceRecord",
    "load_config",
    "__version__",
]
