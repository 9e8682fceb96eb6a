import { describe, expect, it } from "vitest";

import {
  addDecimalStrings,
  emptyDerivation,
  mergeResponse,
  parseScenario,
  serializeScenario,
  toRequest,
  type CalibrateResponse,
  type Scenario,
} from "../src/scenario";

const SCENARIO: Scenario = {
  z: "1.645",
  rows: [
    {
      table: "PH1_num",
      level: "nation_unattributed",
      tau: 10,
      target: { kind: "moe", moe: 500 },
      enabled: true,
    },
    {
      table: "PH1_denom",
      level: "state_a_g",
      tau: null,
      target: { kind: "rho", rho: "0.00117" },
      enabled: false,
    },
    {
      table: "PH3",
      level: "state_a_g",
      tau: 6,
      target: { kind: "moe", moe: 20 },
      enabled: true,
    },
  ],
};

describe("toRequest", () => {
  it("sends only enabled rows and omits tau for unit-only tables", () => {
    const request = toRequest(SCENARIO);
    expect(request.rows).toEqual([
      { table: "PH1_num", level: "nation_unattributed", tau: 10, moe: 500 },
      { table: "PH3", level: "state_a_g", tau: 6, moe: 20 },
    ]);
  });

  it("sends rho targets as decimal strings", () => {
    const scenario: Scenario = {
      z: "1.645",
      rows: [{ ...SCENARIO.rows[1], enabled: true }],
    };
    expect(toRequest(scenario).rows).toEqual([
      { table: "PH1_denom", level: "state_a_g", rho: "0.00117" },
    ]);
  });
});

describe("mergeResponse", () => {
  const response: CalibrateResponse = {
    z: "1.645",
    rows: [
      {
        table: "PH1_num",
        level: "nation_unattributed",
        tau: 10,
        stability: 22,
        moe: 500,
        rho_unbounded: "0.002619",
        rho_bounded: "0.005238",
        sigma2: "92401.6800",
      },
      {
        table: "PH3",
        level: "state_a_g",
        tau: 6,
        stability: 14,
        moe: 20,
        rho_unbounded: "0.662976",
        rho_bounded: "1.325952",
        sigma2: "147.8184",
      },
    ],
    totals: { rho_unbounded: "0.665595", rho_bounded: "1.331190" },
  };

  it("aligns answers with enabled rows, leaving disabled rows null", () => {
    const derivation = mergeResponse(SCENARIO, response);
    expect(derivation.rows[0]?.rhoUnbounded).toBe("0.002619");
    expect(derivation.rows[1]).toBeNull();
    expect(derivation.rows[2]?.moe).toBe(20);
    expect(derivation.totals).toEqual({
      rhoUnbounded: "0.665595",
      rhoBounded: "1.331190",
    });
  });

  it("rejects misaligned responses", () => {
    const swapped = { ...response, rows: [...response.rows].reverse() };
    expect(() => mergeResponse(SCENARIO, swapped)).toThrow(/misaligned/);
    const extra = { ...response, rows: [...response.rows, response.rows[0]] };
    expect(() => mergeResponse(SCENARIO, extra)).toThrow(/extra rows/);
  });
});

describe("scenario documents", () => {
  it("round-trips save then load", () => {
    const text = serializeScenario(SCENARIO);
    expect(parseScenario(text)).toEqual(SCENARIO);
  });

  it("loads the shape the shipped preset uses", () => {
    const doc = {
      z: "1.645",
      rows: [
        {
          table: "PH7",
          level: "state_h_i",
          tau: 10,
          target: { kind: "moe", moe: 200 },
          enabled: true,
        },
      ],
    };
    const scenario = parseScenario(JSON.stringify(doc));
    expect(scenario.rows[0].target).toEqual({ kind: "moe", moe: 200 });
  });

  it("rejects malformed documents with a readable message", () => {
    expect(() => parseScenario("{nope")).toThrow(/not valid JSON/);
    expect(() => parseScenario('{"rows": 3}')).toThrow(/rows array/);
    expect(() =>
      parseScenario(
        JSON.stringify({
          rows: [{ table: "PH1_num", level: "x", tau: 0, target: { kind: "moe", moe: 5 } }],
        }),
      ),
    ).toThrow(/tau/);
    expect(() =>
      parseScenario(
        JSON.stringify({
          rows: [
            {
              table: "PH1_denom",
              level: "x",
              tau: 5,
              target: { kind: "moe", moe: 5 },
            },
          ],
        }),
      ),
    ).toThrow(/does not take tau/);
    expect(() =>
      parseScenario(
        JSON.stringify({
          rows: [{ table: "PH2", level: "x", tau: 1, target: { kind: "rho", rho: "x" } }],
        }),
      ),
    ).toThrow(/decimal string/);
  });

  it("an empty scenario derives zero totals without a service call", () => {
    const empty: Scenario = { z: "1.645", rows: [] };
    expect(emptyDerivation(empty).totals).toEqual({
      rhoUnbounded: "0",
      rhoBounded: "0",
    });
  });
});

describe("addDecimalStrings", () => {
  it("adds decimal strings exactly", () => {
    expect(addDecimalStrings(["0.002619", "0.016371"])).toBe("0.018990");
    expect(addDecimalStrings(["0.00117", "0.000135"])).toBe("0.001305");
    expect(addDecimalStrings(["1", "2.5"])).toBe("3.5");
    expect(addDecimalStrings([])).toBe("0");
  });
});
