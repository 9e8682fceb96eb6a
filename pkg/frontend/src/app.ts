/**
 * Explorer UI: a spreadsheet-style scenario editor over the calibration
 * service. Users toggle population-group levels, edit truncation thresholds
 * and MOE/budget targets, and read off the derived budget pairs, variances,
 * and totals, optionally against a pinned baseline scenario.
 */

import { CalibrationClient, RecomputeQueue, ServiceError } from "./api";
import {
  CalibrateRequest,
  DerivedRow,
  Scenario,
  ScenarioDerivation,
  ScenarioRow,
  UNIT_ONLY_TABLES,
  emptyDerivation,
  hasEnabledRows,
  mergeResponse,
  parseScenario,
  serializeScenario,
  toRequest,
} from "./scenario";

interface BaselineSnapshot {
  scenario: Scenario;
  derivation: ScenarioDerivation;
}

export class ExplorerApp {
  scenario: Scenario = { z: "1.645", rows: [] };
  derivation: ScenarioDerivation | null = null;
  baseline: BaselineSnapshot | null = null;
  /** True while the displayed derived values do not match the scenario. */
  stale = false;
  errorMessage: string | null = null;

  private readonly queue: RecomputeQueue;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: CalibrationClient,
  ) {
    this.queue = new RecomputeQueue(client);
    this.root.addEventListener("change", (event) => {
      void this.onFieldChange(event);
    });
    this.root.addEventListener("click", (event) => {
      void this.onClick(event);
    });
  }

  /** Replace the scenario wholesale and recompute. */
  async setScenario(scenario: Scenario): Promise<void> {
    this.scenario = scenario;
    await this.recompute();
  }

  /** Fetch the production parameterization from the service and load it. */
  async loadProductionPreset(): Promise<void> {
    try {
      const preset = (await this.client.productionPreset()) as {
        z: string;
        rows: { table: string; level: string; tau: number | null; moe: number }[];
      };
      await this.setScenario({
        z: preset.z,
        rows: preset.rows.map((row) => ({
          table: row.table,
          level: row.level,
          tau: row.tau ?? null,
          target: { kind: "moe", moe: row.moe },
          enabled: true,
        })),
      });
    } catch (error) {
      this.fail(error);
      this.render();
    }
  }

  loadScenarioDocument(text: string): Promise<void> {
    return this.setScenario(parseScenario(text));
  }

  saveScenarioDocument(): string {
    return serializeScenario(this.scenario);
  }

  /** Pin the current scenario and its derived values for comparison. */
  pinBaseline(): void {
    if (this.derivation === null) return;
    this.baseline = {
      scenario: structuredClone(this.scenario),
      derivation: structuredClone(this.derivation),
    };
    this.render();
  }

  /** Send the scenario to the service; stale values grey out while pending. */
  async recompute(): Promise<void> {
    this.stale = true;
    this.errorMessage = null;
    this.render();
    if (!hasEnabledRows(this.scenario)) {
      this.derivation = emptyDerivation(this.scenario);
      this.stale = false;
      this.render();
      return;
    }
    const scenarioAtSubmit = this.scenario;
    const request: CalibrateRequest = toRequest(scenarioAtSubmit);
    try {
      const response = await this.queue.submit(request);
      if (response === null || scenarioAtSubmit !== this.scenario) {
        return; // superseded by a newer edit
      }
      this.derivation = mergeResponse(scenarioAtSubmit, response);
      this.stale = false;
    } catch (error) {
      this.fail(error);
    }
    this.render();
  }

  private fail(error: unknown): void {
    this.stale = true;
    this.errorMessage =
      error instanceof ServiceError
        ? `Calibration service error: ${error.message}`
        : `Unexpected error: ${(error as Error).message}`;
  }

  private async onFieldChange(event: Event): Promise<void> {
    const target = event.target as HTMLElement;
    const indexText = target.dataset.row;
    if (target.dataset.field === "z") {
      this.scenario = { ...this.scenario, z: (target as HTMLInputElement).value };
      await this.recompute();
      return;
    }
    if (indexText === undefined) return;
    const index = Number(indexText);
    const row = this.scenario.rows[index];
    if (!row) return;
    const updated = this.applyFieldChange(row, target);
    if (updated === null) return;
    const rows = this.scenario.rows.slice();
    rows[index] = updated;
    this.scenario = { ...this.scenario, rows };
    await this.recompute();
  }

  private applyFieldChange(
    row: ScenarioRow,
    element: HTMLElement,
  ): ScenarioRow | null {
    const field = element.dataset.field;
    if (field === "enabled") {
      return { ...row, enabled: (element as HTMLInputElement).checked };
    }
    if (field === "tau") {
      const tau = Number((element as HTMLInputElement).value);
      if (!Number.isInteger(tau) || tau < 1) return null;
      return { ...row, tau };
    }
    if (field === "target-kind") {
      const kind = (element as HTMLSelectElement).value;
      if (kind === row.target.kind) return null;
      return kind === "moe"
        ? { ...row, target: { kind: "moe", moe: 500 } }
        : { ...row, target: { kind: "rho", rho: "0.001" } };
    }
    if (field === "target-value") {
      const text = (element as HTMLInputElement).value.trim();
      if (row.target.kind === "moe") {
        const moe = Number(text);
        if (!Number.isInteger(moe) || moe < 1) return null;
        return { ...row, target: { kind: "moe", moe } };
      }
      if (!/^\d+(\.\d+)?$/.test(text)) return null;
      return { ...row, target: { kind: "rho", rho: text } };
    }
    return null;
  }

  private async onClick(event: Event): Promise<void> {
    const target = event.target as HTMLElement;
    switch (target.dataset.action) {
      case "load-preset":
        await this.loadProductionPreset();
        break;
      case "pin-baseline":
        this.pinBaseline();
        break;
      case "save-scenario":
        this.downloadScenario();
        break;
      case "retry":
        await this.recompute();
        break;
      default:
        break;
    }
  }

  private downloadScenario(): void {
    const blob = new Blob([this.saveScenarioDocument()], {
      type: "application/json",
    });
    const link = document.createElement("a");
    link.href = URL.createObjectURL(blob);
    link.download = "scenario.json";
    link.click();
    URL.revokeObjectURL(link.href);
  }

  render(): void {
    const staleClass = this.stale ? " stale" : "";
    this.root.innerHTML = `
      <header>
        <h1>Tabulation budget explorer</h1>
        <div class="toolbar">
          <button data-action="load-preset">Load production preset</button>
          <button data-action="pin-baseline">Pin as baseline</button>
          <button data-action="save-scenario">Save scenario</button>
          <label>Load scenario <input type="file" id="scenario-file"></label>
          <label>z <input data-field="z" size="6" value="${escapeHtml(this.scenario.z)}"></label>
        </div>
        ${this.renderBanner()}
      </header>
      <main class="panels">
        <section class="panel">
          <h2>Scenario</h2>
          ${this.renderTable(this.scenario, this.derivation, true, staleClass)}
          ${this.renderTotals(this.derivation, staleClass)}
        </section>
        ${this.renderBaselinePanel()}
      </main>
    `;
    const file = this.root.querySelector<HTMLInputElement>("#scenario-file");
    file?.addEventListener("change", () => {
      void this.onScenarioFile(file);
    });
  }

  private async onScenarioFile(input: HTMLInputElement): Promise<void> {
    const chosen = input.files?.[0];
    if (!chosen) return;
    try {
      await this.loadScenarioDocument(await chosen.text());
    } catch (error) {
      this.errorMessage = `Could not load scenario: ${(error as Error).message}`;
      this.render();
    }
  }

  private renderBanner(): string {
    if (this.errorMessage !== null) {
      return `<div class="banner error" role="alert">${escapeHtml(this.errorMessage)}
        <button data-action="retry">Retry</button></div>`;
    }
    if (this.stale) {
      return `<div class="banner pending">Recomputing…</div>`;
    }
    return "";
  }

  private renderBaselinePanel(): string {
    if (this.baseline === null) {
      return `<section class="panel placeholder">
        <h2>Baseline</h2><p>Pin a scenario to compare against.</p></section>`;
    }
    return `<section class="panel baseline">
      <h2>Baseline</h2>
      ${this.renderTable(this.baseline.scenario, this.baseline.derivation, false, "")}
      ${this.renderTotals(this.baseline.derivation, "")}
    </section>`;
  }

  private renderTable(
    scenario: Scenario,
    derivation: ScenarioDerivation | null,
    editable: boolean,
    staleClass: string,
  ): string {
    const body = scenario.rows
      .map((row, index) =>
        this.renderRow(row, derivation?.rows[index] ?? null, index, editable, staleClass),
      )
      .join("");
    return `<table class="scenario">
      <thead><tr>
        <th>on</th><th>table</th><th>level</th><th>τ</th><th>target</th>
        <th>ρ (add/remove)</th><th>ρ (change-one)</th><th>σ²</th><th>MOE</th>
      </tr></thead>
      <tbody>${body}</tbody>
    </table>`;
  }

  private renderRow(
    row: ScenarioRow,
    derived: DerivedRow | null,
    index: number,
    editable: boolean,
    staleClass: string,
  ): string {
    const disabledClass = row.enabled ? "" : " disabled";
    const tauCell = UNIT_ONLY_TABLES.has(row.table)
      ? "<td>—</td>"
      : editable
        ? `<td><input type="number" min="1" data-row="${index}" data-field="tau"
             value="${row.tau ?? ""}" class="tau"></td>`
        : `<td>${row.tau ?? ""}</td>`;
    const targetCell = editable
      ? `<td class="target">
           <select data-row="${index}" data-field="target-kind">
             <option value="moe"${row.target.kind === "moe" ? " selected" : ""}>MOE</option>
             <option value="rho"${row.target.kind === "rho" ? " selected" : ""}>ρ</option>
           </select>
           <input data-row="${index}" data-field="target-value"
             value="${row.target.kind === "moe" ? row.target.moe : row.target.rho}" size="9">
         </td>`
      : `<td>${row.target.kind === "moe" ? `MOE ${row.target.moe}` : `ρ ${row.target.rho}`}</td>`;
    const enabledCell = editable
      ? `<td><input type="checkbox" data-row="${index}" data-field="enabled"
           ${row.enabled ? "checked" : ""}></td>`
      : `<td>${row.enabled ? "✓" : "—"}</td>`;
    return `<tr class="row${disabledClass}" data-table="${row.table}" data-level="${row.level}">
      ${enabledCell}
      <td>${escapeHtml(row.table)}</td>
      <td>${escapeHtml(row.level)}</td>
      ${tauCell}
      ${targetCell}
      <td class="derived${staleClass}" data-col="rho-unbounded">${derived?.rhoUnbounded ?? "·"}</td>
      <td class="derived${staleClass}" data-col="rho-bounded">${derived?.rhoBounded ?? "·"}</td>
      <td class="derived${staleClass}" data-col="sigma2">${derived?.sigma2 ?? "·"}</td>
      <td class="derived${staleClass}" data-col="moe">${derived?.moe ?? "·"}</td>
    </tr>`;
  }

  private renderTotals(
    derivation: ScenarioDerivation | null,
    staleClass: string,
  ): string {
    const unbounded = derivation?.totals.rhoUnbounded ?? "·";
    const bounded = derivation?.totals.rhoBounded ?? "·";
    return `<p class="totals${staleClass}">
      Total ρ: <strong data-col="total-unbounded">${unbounded}</strong> add/remove
      · <strong data-col="total-bounded">${bounded}</strong> change-one
    </p>`;
  }
}

function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}
