/** Wire types for the local review service (/api/v1). */

export type Category = "illegal" | "dark" | "gray";

export interface ChunkInfo {
  text: string;
  char_span: [number, number];
  dom_path: string[];
  word_count: number;
}

export interface LabelDetail {
  code: string;
  display_name: string;
  category: Category;
  legal_ref_url: string | null;
  explanation: string;
}

export interface SimilarExample {
  clause_id: string;
  text: string;
  labels: string[];
  relevance: number;
}

export interface TaskError {
  task: string;
  error: string;
}

export interface Finding {
  chunk: ChunkInfo;
  detection_score: number;
  labels: Record<string, string[]>;
  label_details: LabelDetail[];
  similar_examples: SimilarExample[];
  errors: TaskError[];
  prompt_audit: unknown;
}

export interface FindingsResponse {
  version: number;
  findings: Finding[];
}

export interface LabelsResponse {
  labels: LabelDetail[];
}

export interface SimilarResponse {
  similar: SimilarExample[];
}

export interface ScanOptions {
  categories?: string[];
  detection_threshold?: number;
  include_similar?: boolean;
  max_similar?: number;
}

/** Side-panel view state: a pure function of the last API responses. */
export type PanelPhase = "idle" | "scanning" | "done" | "error";

export interface SimilarPanelState {
  open: boolean;
  loading: boolean;
  error: string | null;
  /** null until loaded (embedded examples load instantly). */
  examples: SimilarExample[] | null;
}

export interface PanelState {
  phase: PanelPhase;
  findings: Finding[];
  similar: SimilarPanelState[]; // parallel to findings
  error: string | null;
  retryable: boolean;
}

export const initialPanelState = (): PanelState => ({
  phase: "idle",
  findings: [],
  similar: [],
  error: null,
  retryable: false,
});
