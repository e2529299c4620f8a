/**
 * Wire shapes of the runsim service plus the client session type.
 *
 * Everything numeric displayed by the UI comes from these response
 * bodies; the client never computes a trajectory value itself.
 */

export interface RunSummary {
  run_id: string;
  role: string;
  num_steps: number;
  tracked_test_ids: number[];
}

export interface RunListResponse {
  n: number;
  runs: RunSummary[];
  example_names: Record<string, string>;
  test_example_names: Record<string, string>;
}

/** Recorded loss trajectory; keys are step numbers serialized as strings. */
export interface RecordedTrajectory {
  test_example_id: number;
  initial_loss: number;
  losses: Record<string, number>;
}

export interface RunDetail {
  run_id: string;
  role: string;
  n: number;
  steps: number[][];
  trajectories: RecordedTrajectory[];
}

export interface SimulatedTrajectory {
  test_example_id: number;
  initial_loss: number;
  losses: Array<number | null>;
  final_loss: number | null;
  diverged_at: number | null;
}

export interface SimulateResponse {
  run_id: string;
  params_ref: string;
  trajectories: SimulatedTrajectory[];
}

export type EditOp =
  | { op: "remove_example"; example_id: number }
  | { op: "duplicate_example"; example_id: number; count: number }
  | { op: "remove_steps"; start: number; stop: number }
  | { op: "reorder"; order: number[] }
  | { op: "replace_batch"; step: number; batch: number[] };

export interface WhatIfResult {
  test_example_id: number;
  baseline: SimulatedTrajectory;
  edited: SimulatedTrajectory;
  delta_final: number | null;
  actual_final: number | null;
}

export interface WhatIfResponse {
  run_id: string;
  params_ref: string;
  edits: EditOp[];
  baseline_steps: number;
  edited_steps: number;
  results: WhatIfResult[];
}

export interface FitJobStatus {
  job_id: string;
  status: "queued" | "running" | "done" | "failed";
  variant: string;
  params_ref: string | null;
  lam: number | null;
  skipped_test_ids: number[] | null;
  error: string | null;
}

export interface ParamsResponse {
  ref: string;
  params: Record<string, unknown>;
}

/**
 * One browser tab's working state. The edit list is ordered and is
 * exactly what the last acknowledged preview request carried; the
 * preview field only ever holds the newest acknowledged response.
 */
export interface UiSession {
  paramsRef: string | null;
  runId: string | null;
  runDetail: RunDetail | null;
  edits: EditOp[];
  selectedTestIds: number[];
  preview: WhatIfResponse | null;
  variantRefs: string[];
  variantCurves: SimulateResponse[];
}

export function emptySession(): UiSession {
  return {
    paramsRef: null,
    runId: null,
    runDetail: null,
    edits: [],
    selectedTestIds: [],
    preview: null,
    variantRefs: [],
    variantCurves: [],
  };
}
