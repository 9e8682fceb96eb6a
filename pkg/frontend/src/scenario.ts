/**
 * Scenario model: which population-group levels are tabulated, with what
 * truncation thresholds, and at what accuracy or budget targets.
 *
 * The UI never converts between MOE and budget itself; every derived figure
 * (budget pair, variance, achieved MOE, totals) comes back from the
 * calibration service, so there is a single source of truth for the math.
 */

/** Accuracy-or-budget target of one row: exactly one of the two. */
export type RowTarget =
  | { kind: "moe"; moe: number }
  | { kind: "rho"; rho: string };

export interface ScenarioRow {
  table: string;
  level: string;
  /** Truncation threshold; null on unit-only tables. */
  tau: number | null;
  target: RowTarget;
  /** Disabled rows are excluded from requests and contribute 0 to totals. */
  enabled: boolean;
}

export interface Scenario {
  z: string;
  rows: ScenarioRow[];
}

/** Values the service derives for one enabled row. */
export interface DerivedRow {
  stability: number;
  moe: number;
  rhoUnbounded: string;
  rhoBounded: string;
  sigma2: string;
}

export interface Totals {
  rhoUnbounded: string;
  rhoBounded: string;
}

/** What the service reported for the scenario's current state. */
export interface ScenarioDerivation {
  /** Derived values by row index; disabled rows are null. */
  rows: (DerivedRow | null)[];
  totals: Totals;
}

export interface CalibrateRequest {
  z: string;
  rows: {
    table: string;
    level: string;
    tau?: number;
    moe?: number;
    rho?: string;
  }[];
}

export interface CalibrateResponse {
  z: string;
  rows: {
    table: string;
    level: string;
    tau: number | null;
    stability: number;
    moe: number;
    rho_unbounded: string;
    rho_bounded: string;
    sigma2: string;
  }[];
  totals: { rho_unbounded: string; rho_bounded: string };
}

export const UNIT_ONLY_TABLES = new Set(["PH1_denom", "PH5_denom", "PH8_denom"]);

export const ZERO_TOTALS: Totals = { rhoUnbounded: "0", rhoBounded: "0" };

/** Build the service request for the scenario's enabled rows. */
export function toRequest(scenario: Scenario): CalibrateRequest {
  return {
    z: scenario.z,
    rows: scenario.rows
      .filter((row) => row.enabled)
      .map((row) => ({
        table: row.table,
        level: row.level,
        ...(row.tau === null ? {} : { tau: row.tau }),
        ...(row.target.kind === "moe"
          ? { moe: row.target.moe }
          : { rho: row.target.rho }),
      })),
  };
}

/**
 * Align a service response with the scenario rows it was computed from.
 * Response rows arrive in enabled-row order; disabled rows stay null.
 */
export function mergeResponse(
  scenario: Scenario,
  response: CalibrateResponse,
): ScenarioDerivation {
  const derived: (DerivedRow | null)[] = scenario.rows.map(() => null);
  let cursor = 0;
  scenario.rows.forEach((row, index) => {
    if (!row.enabled) return;
    const answer = response.rows[cursor];
    cursor += 1;
    if (!answer || answer.table !== row.table || answer.level !== row.level) {
      throw new Error(`service response misaligned at row ${index}`);
    }
    derived[index] = {
      stability: answer.stability,
      moe: answer.moe,
      rhoUnbounded: answer.rho_unbounded,
      rhoBounded: answer.rho_bounded,
      sigma2: answer.sigma2,
    };
  });
  if (cursor !== response.rows.length) {
    throw new Error("service response has extra rows");
  }
  return {
    rows: derived,
    totals: {
      rhoUnbounded: response.totals.rho_unbounded,
      rhoBounded: response.totals.rho_bounded,
    },
  };
}

/** An all-disabled or empty scenario needs no service round-trip. */
export function emptyDerivation(scenario: Scenario): ScenarioDerivation {
  return { rows: scenario.rows.map(() => null), totals: ZERO_TOTALS };
}

export function hasEnabledRows(scenario: Scenario): boolean {
  return scenario.rows.some((row) => row.enabled);
}

/** Serialize for saving; stable field order so saves diff cleanly. */
export function serializeScenario(scenario: Scenario): string {
  return JSON.stringify(
    {
      z: scenario.z,
      rows: scenario.rows.map((row) => ({
        table: row.table,
        level: row.level,
        tau: row.tau,
        target: row.target,
        enabled: row.enabled,
      })),
    },
    null,
    2,
  );
}

/** Parse a saved scenario document, validating shape and targets. */
export function parseScenario(text: string): Scenario {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (error) {
    throw new Error(`not valid JSON: ${(error as Error).message}`);
  }
  if (typeof raw !== "object" || raw === null || !Array.isArray((raw as any).rows)) {
    throw new Error("scenario must be an object with a rows array");
  }
  const doc = raw as { z?: unknown; rows: unknown[] };
  const z = typeof doc.z === "string" ? doc.z : "1.645";
  if (!/^\d+(\.\d+)?$/.test(z)) {
    throw new Error(`bad z value: ${z}`);
  }
  const rows = doc.rows.map((entry, index) => parseRow(entry, index));
  return { z, rows };
}

function parseRow(entry: unknown, index: number): ScenarioRow {
  if (typeof entry !== "object" || entry === null) {
    throw new Error(`row ${index} must be an object`);
  }
  const row = entry as Record<string, unknown>;
  if (typeof row.table !== "string" || typeof row.level !== "string") {
    throw new Error(`row ${index} needs table and level strings`);
  }
  const tau = row.tau === null || row.tau === undefined ? null : row.tau;
  if (tau !== null && (!Number.isInteger(tau) || (tau as number) < 1)) {
    throw new Error(`row ${index}: tau must be an integer >= 1 or null`);
  }
  if (UNIT_ONLY_TABLES.has(row.table) && tau !== null) {
    throw new Error(`row ${index}: ${row.table} does not take tau`);
  }
  const target = parseTarget(row.target, index);
  return {
    table: row.table,
    level: row.level,
    tau: tau as number | null,
    target,
    enabled: row.enabled !== false,
  };
}

function parseTarget(raw: unknown, index: number): RowTarget {
  if (typeof raw !== "object" || raw === null) {
    throw new Error(`row ${index} needs a target`);
  }
  const target = raw as Record<string, unknown>;
  if (target.kind === "moe") {
    if (!Number.isInteger(target.moe) || (target.moe as number) < 1) {
      throw new Error(`row ${index}: moe must be an integer >= 1`);
    }
    return { kind: "moe", moe: target.moe as number };
  }
  if (target.kind === "rho") {
    if (typeof target.rho !== "string" || !/^\d+(\.\d+)?$/.test(target.rho)) {
      throw new Error(`row ${index}: rho must be a decimal string`);
    }
    return { kind: "rho", rho: target.rho };
  }
  throw new Error(`row ${index}: target.kind must be "moe" or "rho"`);
}

/**
 * Decimal-string addition, used only to cross-check displayed totals
 * against per-row values (never to compute budgets locally).
 */
export function addDecimalStrings(values: string[]): string {
  let scale = 0;
  for (const value of values) {
    const dot = value.indexOf(".");
    if (dot >= 0) scale = Math.max(scale, value.length - dot - 1);
  }
  let total = 0n;
  for (const value of values) {
    const [whole, frac = ""] = value.split(".");
    total += BigInt(whole + frac.padEnd(scale, "0"));
  }
  if (scale === 0) return total.toString();
  const text = total.toString().padStart(scale + 1, "0");
  return `${text.slice(0, -scale)}.${text.slice(-scale)}`;
}
