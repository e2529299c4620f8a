/**
 * Session store: holds the working state, talks to the service, and
 * notifies the view after every acknowledged change.
 *
 * Preview flow: edits mutate the working list immediately, but the
 * network request is debounced (~150 ms) and carries a supersession
 * token. A response is applied only if it is still the newest request
 * in flight; older in-flight requests are aborted outright, so the
 * rendered overlay always matches the most recent acknowledged edit
 * list and never flickers backwards.
 */

import { ApiError, ServiceClient } from "./api.js";
import { applyEditList, describeEdit } from "./edits.js";
import type { EditOp, RunSummary, UiSession, WhatIfResponse } from "./types.js";
import { emptySession } from "./types.js";

export const PREVIEW_DEBOUNCE_MS = 150;
const FIT_POLL_MS = 250;

export interface StoreStatus {
  /** connection banner text; null when the service answers */
  banner: string | null;
  /** inline reason for the last rejected edit */
  editError: string | null;
  /** hint shown when the store has nothing to pick from */
  guidance: string | null;
  previewPending: boolean;
  fitRunning: boolean;
}

export class SessionStore {
  readonly client: ServiceClient;
  session: UiSession = emptySession();
  runs: RunSummary[] = [];
  exampleNames: Record<string, string> = {};
  testExampleNames: Record<string, string> = {};
  status: StoreStatus = {
    banner: null,
    editError: null,
    guidance: null,
    previewPending: false,
    fitRunning: false,
  };

  private readonly debounceMs: number;
  private listeners: Array<() => void> = [];
  private debounceHandle: ReturnType<typeof setTimeout> | null = null;
  private requestSeq = 0;
  private inflight: AbortController | null = null;
  private acknowledgedEdits: EditOp[] = [];

  constructor(client: ServiceClient, debounceMs: number = PREVIEW_DEBOUNCE_MS) {
    this.client = client;
    this.debounceMs = debounceMs;
  }

  subscribe(listener: () => void): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(): void {
    for (const l of this.listeners) l();
  }

  // -- workspace ----------------------------------------------------------

  async loadWorkspace(): Promise<void> {
    this.status.banner = null;
    try {
      const listing = await this.client.listRuns();
      this.runs = [...listing.runs].sort((a, b) => a.run_id.localeCompare(b.run_id));
      this.exampleNames = listing.example_names;
      this.testExampleNames = listing.test_example_names;
    } catch (err) {
      this.runs = [];
      this.status.banner = err instanceof ApiError ? err.message : String(err);
      this.emit();
      return;
    }
    try {
      const params = await this.client.params();
      this.session.paramsRef = params.ref;
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        this.session.paramsRef = null; // nothing fitted yet
      } else {
        this.status.banner = err instanceof ApiError ? err.message : String(err);
      }
    }
    if (this.session.paramsRef && !this.session.variantRefs.includes(this.session.paramsRef)) {
      this.session.variantRefs.push(this.session.paramsRef);
    }
    this.status.guidance =
      this.runs.length === 0
        ? "the store has no runs yet; generate a run log and restart the service"
        : this.session.paramsRef === null
          ? "no fitted weights yet; press fit to solve with defaults"
          : null;
    this.emit();
  }

  /** Picker selection. Exactly one run-detail request per call. */
  async selectRun(runId: string): Promise<void> {
    const detail = await this.client.runDetail(runId);
    this.session.runId = runId;
    this.session.runDetail = detail;
    this.session.edits = [];
    this.acknowledgedEdits = [];
    this.session.preview = null;
    this.session.selectedTestIds = detail.trajectories.map((t) => t.test_example_id);
    this.status.editError = null;
    this.emit();
    this.schedulePreview(); // empty edit list: baseline overlay, zero delta
  }

  setSelectedTestIds(ids: number[]): void {
    this.session.selectedTestIds = [...ids].sort((a, b) => a - b);
    this.emit();
    this.schedulePreview();
  }

  // -- edit list ----------------------------------------------------------

  get editLines(): string[] {
    return this.session.edits.map((e) => describeEdit(e, this.exampleNames));
  }

  /**
   * Append an edit. The candidate list is validated client-side
   * against the loaded curriculum before anything is sent; a bad edit
   * never joins the list.
   */
  pushEdit(edit: EditOp): boolean {
    const detail = this.session.runDetail;
    if (!detail) {
      this.status.editError = "select a run first";
      this.emit();
      return false;
    }
    const candidate = [...this.session.edits, edit];
    const outcome = applyEditList(detail.n, detail.steps, candidate);
    if (!outcome.ok) {
      this.status.editError = outcome.reason;
      this.emit();
      return false;
    }
    this.session.edits = candidate;
    this.status.editError = null;
    this.emit();
    this.schedulePreview();
    return true;
  }

  /** Drop one edit; refused when a later edit stops validating without it. */
  removeEdit(index: number): boolean {
    const detail = this.session.runDetail;
    if (!detail || index < 0 || index >= this.session.edits.length) return false;
    const candidate = this.session.edits.filter((_, i) => i !== index);
    const outcome = applyEditList(detail.n, detail.steps, candidate);
    if (!outcome.ok) {
      // report the failing edit by its position in the displayed list,
      // not its index in the shortened candidate
      const shown = outcome.index < index ? outcome.index + 1 : outcome.index + 2;
      this.status.editError =
        `cannot drop edit ${index + 1}: edit ${shown} then fails (${outcome.reason})`;
      this.emit();
      return false;
    }
    this.session.edits = candidate;
    this.status.editError = null;
    this.emit();
    this.schedulePreview();
    return true;
  }

  clearEdits(): void {
    this.session.edits = [];
    this.status.editError = null;
    this.emit();
    this.schedulePreview();
  }

  // -- preview ------------------------------------------------------------

  schedulePreview(): void {
    if (!this.session.runId) return;
    if (this.debounceHandle !== null) clearTimeout(this.debounceHandle);
    this.status.previewPending = true;
    this.debounceHandle = setTimeout(() => {
      this.debounceHandle = null;
      void this.sendPreview();
    }, this.debounceMs);
  }

  /** Issue the what-if request for the current list; superseded replies are dropped. */
  async sendPreview(): Promise<void> {
    const runId = this.session.runId;
    if (!runId) return;
    const token = ++this.requestSeq;
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    const sent = [...this.session.edits];
    let response: WhatIfResponse;
    try {
      response = await this.client.whatIf(
        runId,
        sent,
        this.session.paramsRef ?? undefined,
        this.session.selectedTestIds,
        controller.signal
      );
    } catch (err) {
      if (token !== this.requestSeq) return; // a newer request owns the display
      this.status.previewPending = false;
      if (err instanceof ApiError && err.status === 422) {
        // the server refused something the client validator let through;
        // roll back to the last acknowledged list
        this.session.edits = [...this.acknowledgedEdits];
        this.status.editError = err.message;
      } else if (err instanceof ApiError && err.unreachable) {
        this.status.banner = err.message;
      } else if (!(err instanceof DOMException)) {
        this.status.editError = err instanceof Error ? err.message : String(err);
      }
      this.emit();
      return;
    }
    if (token !== this.requestSeq) return; // stale: a newer edit superseded this reply
    this.inflight = null;
    this.status.previewPending = false;
    this.status.banner = null;
    this.acknowledgedEdits = sent;
    this.session.preview = response;
    this.emit();
  }

  // -- variants -----------------------------------------------------------

  async addVariantRef(ref: string): Promise<boolean> {
    try {
      const confirmed = await this.client.params(ref);
      if (!this.session.variantRefs.includes(confirmed.ref)) {
        this.session.variantRefs.push(confirmed.ref);
      }
      this.emit();
      return true;
    } catch (err) {
      this.status.editError = err instanceof Error ? err.message : String(err);
      this.emit();
      return false;
    }
  }

  /** One no-edit simulation per known ref, rendered as a multi-curve overlay. */
  async compareVariants(): Promise<void> {
    if (!this.session.runId) return;
    const curves = [];
    for (const ref of this.session.variantRefs) {
      curves.push(
        await this.client.simulate(this.session.runId, ref, this.session.selectedTestIds)
      );
    }
    this.session.variantCurves = curves;
    this.emit();
  }

  // -- fitting ------------------------------------------------------------

  /** Fire-and-poll POST /fit with server defaults. */
  async fitDefaults(): Promise<void> {
    this.status.fitRunning = true;
    this.emit();
    try {
      let job = await this.client.startFit();
      while (job.status === "queued" || job.status === "running") {
        await new Promise((resolve) => setTimeout(resolve, FIT_POLL_MS));
        job = await this.client.fitJob(job.job_id);
      }
      if (job.status === "failed") {
        this.status.editError = job.error ?? "fit failed";
      } else if (job.params_ref) {
        this.session.paramsRef = job.params_ref;
        if (!this.session.variantRefs.includes(job.params_ref)) {
          this.session.variantRefs.push(job.params_ref);
        }
        this.status.guidance = null;
        this.schedulePreview();
      }
    } catch (err) {
      this.status.banner = err instanceof ApiError ? err.message : String(err);
    } finally {
      this.status.fitRunning = false;
      this.emit();
    }
  }
}
