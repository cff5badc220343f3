/**
 * Base URL of the answer service.
 *
 * Baked in at build time. Deployments either edit this constant before
 * running the build or define `globalThis.TABLEQA_API_BASE` in a script
 * tag that loads ahead of the bundle.
 */
export const API_BASE: string =
  (globalThis as { TABLEQA_API_BASE?: string }).TABLEQA_API_BASE ??
  "http://127.0.0.1:8000";
