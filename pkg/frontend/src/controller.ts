/** Side-panel controller: orchestrates scans and similar-example
 * loading against injected dependencies, so it is fully testable
 * without a browser. One scan in flight at a time; a new scan cancels
 * the previous one. */

import { ServiceClient, ServiceError } from "./api";
import type { Finding, PanelState, SimilarPanelState } from "./types";
import { initialPanelState } from "./types";

export interface ControllerDeps {
  client: ServiceClient;
  getPageHtml: () => Promise<string>;
  /** Called with the new state after every transition. */
  onState: (state: PanelState) => void;
  /** Ask the page to scroll to/highlight a clause. */
  highlight?: (finding: Finding) => void;
  maxSimilar?: number;
}

const freshSimilar = (finding: Finding): SimilarPanelState => ({
  open: false,
  loading: false,
  error: null,
  examples: finding.similar_examples.length ? finding.similar_examples : null,
});

export class PanelController {
  state: PanelState = initialPanelState();
  private scanAbort: AbortController | null = null;

  constructor(private readonly deps: ControllerDeps) {}

  private setState(partial: Partial<PanelState>): void {
    this.state = { ...this.state, ...partial };
    this.deps.onState(this.state);
  }

  private adoptFindings(findings: Finding[]): void {
    this.setState({
      findings,
      similar: findings.map(freshSimilar),
    });
  }

  async scanCurrentPage(): Promise<void> {
    this.scanAbort?.abort();
    const abort = new AbortController();
    this.scanAbort = abort;
    this.setState({ phase: "scanning", error: null, retryable: false, findings: [], similar: [] });
    let html: string;
    try {
      html = await this.deps.getPageHtml();
    } catch (err) {
      this.setState({ phase: "error", error: `cannot read page: ${(err as Error).message}`, retryable: true });
      return;
    }
    try {
      const response = await this.deps.client.scan(html, "html", {}, abort.signal);
      if (abort.signal.aborted) return; // superseded by a newer scan
      this.adoptFindings(response.findings);
      this.setState({ phase: "done" });
    } catch (err) {
      if ((err as Error).name === "AbortError" || abort.signal.aborted) return;
      if (err instanceof ServiceError) {
        if (err.partial) this.adoptFindings(err.partial.findings);
        this.setState({ phase: "error", error: err.message, retryable: err.retryable });
      } else {
        this.setState({ phase: "error", error: (err as Error).message, retryable: true });
      }
    }
  }

  retry(): Promise<void> {
    return this.scanCurrentPage();
  }

  highlight(index: number): void {
    const finding = this.state.findings[index];
    if (finding && this.deps.highlight) this.deps.highlight(finding);
  }

  /** Toggle the similar-example drawer; lazy-fetch when not embedded. */
  async toggleSimilar(index: number): Promise<void> {
    const current = this.state.similar[index];
    if (!current) return;
    const update = (next: Partial<SimilarPanelState>) => {
      const similar = this.state.similar.slice();
      similar[index] = { ...similar[index], ...next };
      this.setState({ similar });
    };
    if (current.open) {
      update({ open: false });
      return;
    }
    update({ open: true });
    if (current.examples !== null) return; // embedded examples, nothing to fetch
    update({ loading: true, error: null });
    try {
      const response = await this.deps.client.similar(
        this.state.findings[index].chunk.text,
        this.deps.maxSimilar ?? 5,
      );
      update({ loading: false, examples: response.similar });
    } catch (err) {
      update({ loading: false, error: (err as Error).message });
    }
  }
}
