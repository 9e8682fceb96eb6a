/**
 * End-to-end check against the real calibration service: spawns
 * `python -m phtab.cli serve` and drives the app through actual HTTP.
 * Skipped when the backend is not installed in the environment.
 */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { CalibrationClient } from "../src/api";
import { ExplorerApp } from "../src/app";
import { until } from "./mockService";

const PYTHON = process.env.PHTAB_PYTHON ?? "python3";

function backendAvailable(): boolean {
  const probe = spawnSync(PYTHON, ["-c", "import phtab"], { timeout: 10000 });
  return probe.status === 0;
}

const available = backendAvailable();
const suite = available ? describe : describe.skip;

suite("against the real calibration service", () => {
  let server: ChildProcess;
  let baseUrl = "";

  beforeAll(async () => {
    server = spawn(PYTHON, ["-m", "phtab.cli", "serve", "--port", "0"], {
      stdio: ["ignore", "pipe", "pipe"],
    });
    const url = await new Promise<string>((resolve, reject) => {
      const timer = setTimeout(() => reject(new Error("serve did not start")), 15000);
      server.stdout!.on("data", (chunk: Buffer) => {
        const match = /http:\/\/[\d.]+:\d+/.exec(chunk.toString());
        if (match) {
          clearTimeout(timer);
          resolve(match[0]);
        }
      });
      server.on("exit", (code) => reject(new Error(`serve exited: ${code}`)));
    });
    baseUrl = url;
  });

  afterAll(() => {
    server?.kill();
  });

  it("loads the production preset and reproduces the published totals", async () => {
    document.body.innerHTML = '<div id="app"></div>';
    const root = document.getElementById("app")!;
    const client = new CalibrationClient(baseUrl, fetch.bind(globalThis));
    const app = new ExplorerApp(root, client);
    app.render();

    await app.loadProductionPreset();
    await until(() => !app.stale || app.errorMessage !== null, 15000);
    expect(app.errorMessage).toBeNull();
    expect(app.derivation?.totals.rhoUnbounded).toBe("1.257281");
    expect(app.derivation?.totals.rhoBounded).toBe("2.514562");

    // One service round-trip after an MOE edit updates the row budget.
    const index = app.scenario.rows.findIndex(
      (row) =>
        row.table === "PH1_num" &&
        row.level === "nation_unattributed" &&
        row.tau === 10,
    );
    const input = root.querySelectorAll<HTMLInputElement>(
      'input[data-field="target-value"]',
    )[index];
    input.value = "200";
    input.dispatchEvent(new Event("change", { bubbles: true }));
    await until(
      () => app.derivation?.rows[index]?.rhoUnbounded === "0.016371",
      15000,
    );
    expect(app.derivation?.rows[index]?.rhoBounded).toBe("0.032742");
  });
});
