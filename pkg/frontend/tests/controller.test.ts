import { describe, expect, it, vi } from "vitest";

import { ServiceClient, ServiceError } from "../src/api";
import { PanelController } from "../src/controller";
import { renderPanel } from "../src/render";
import type { FindingsResponse, PanelState, SimilarResponse } from "../src/types";
import { emptyFindings, findingMulti, similarExamples, twoFindings } from "./payloads";

/** Test double for the service client. */
class FakeClient {
  scanCalls = 0;
  similarCalls: Array<{ text: string; k: number }> = [];
  scanImpl: (signal?: AbortSignal) => Promise<FindingsResponse> = async () => twoFindings;
  similarImpl: () => Promise<SimilarResponse> = async () => ({ similar: similarExamples });

  scan(_c: string, _t: string, _o: unknown, signal?: AbortSignal): Promise<FindingsResponse> {
    this.scanCalls += 1;
    return this.scanImpl(signal);
  }

  similar(text: string, k: number): Promise<SimilarResponse> {
    this.similarCalls.push({ text, k });
    return this.similarImpl();
  }
}

const nextTick = () => new Promise((resolve) => setTimeout(resolve, 0));

function makeController(client: FakeClient, pageHtml = "<html><body>page</body></html>") {
  const states: PanelState[] = [];
  const highlighted: number[] = [];
  const controller = new PanelController({
    client: client as unknown as ServiceClient,
    getPageHtml: async () => pageHtml,
    onState: (state) => states.push(state),
    highlight: (finding) => highlighted.push(finding.chunk.char_span[0]),
  });
  return { controller, states, highlighted };
}

describe("scan_current_page", () => {
  it("renders the mock payload's exact finding count and badges", async () => {
    const client = new FakeClient();
    const { controller } = makeController(client);
    await controller.scanCurrentPage();
    expect(controller.state.phase).toBe("done");
    expect(controller.state.findings).toHaveLength(2);
    const html = renderPanel(controller.state);
    expect(html.match(/<article class="finding"/g)).toHaveLength(2);
    expect(html.match(/badge-dark/g)).toHaveLength(1);
    expect(html.match(/badge-illegal/g)).toHaveLength(1);
    expect(html.match(/badge-gray/g)).toHaveLength(1);
  });

  it("shows progress state while the scan is in flight", async () => {
    const client = new FakeClient();
    let release!: (value: FindingsResponse) => void;
    client.scanImpl = () => new Promise((resolve) => (release = resolve));
    const { controller, states } = makeController(client);
    const pending = controller.scanCurrentPage();
    expect(controller.state.phase).toBe("scanning");
    expect(renderPanel(controller.state)).toContain("scanning…");
    await nextTick(); // let the controller reach client.scan
    release(emptyFindings);
    await pending;
    expect(controller.state.phase).toBe("done");
    expect(states.map((s) => s.phase)).toContain("scanning");
  });

  it("renders the no-issues state for an empty scan", async () => {
    const client = new FakeClient();
    client.scanImpl = async () => emptyFindings;
    const { controller } = makeController(client);
    await controller.scanCurrentPage();
    expect(renderPanel(controller.state)).toContain("No issues detected");
  });

  it("503 shows a retry prompt without crashing and retry recovers", async () => {
    const client = new FakeClient();
    client.scanImpl = async () => {
      throw new ServiceError("service reported providers unreachable", 503, true);
    };
    const { controller } = makeController(client);
    await controller.scanCurrentPage();
    expect(controller.state.phase).toBe("error");
    expect(controller.state.retryable).toBe(true);
    const html = renderPanel(controller.state);
    expect(html).toContain('data-action="retry"');

    client.scanImpl = async () => twoFindings;
    await controller.retry();
    expect(controller.state.phase).toBe("done");
    expect(controller.state.findings).toHaveLength(2);
    expect(client.scanCalls).toBe(2);
  });

  it("renders partial findings delivered with a 503", async () => {
    const client = new FakeClient();
    client.scanImpl = async () => {
      throw new ServiceError("providers unreachable", 503, true, {
        version: 1,
        findings: [findingMulti],
      });
    };
    const { controller } = makeController(client);
    await controller.scanCurrentPage();
    expect(controller.state.phase).toBe("error");
    expect(controller.state.findings).toHaveLength(1);
    const html = renderPanel(controller.state);
    expect(html).toContain("partial finding(s)");
    expect(html).toContain("badge-error");
  });

  it("reports page-extraction failures as retryable errors", async () => {
    const client = new FakeClient();
    const states: PanelState[] = [];
    const controller = new PanelController({
      client: client as unknown as ServiceClient,
      getPageHtml: async () => {
        throw new Error("no active tab");
      },
      onState: (s) => states.push(s),
    });
    await controller.scanCurrentPage();
    expect(controller.state.phase).toBe("error");
    expect(controller.state.error).toContain("no active tab");
    expect(client.scanCalls).toBe(0);
  });

  it("a new scan supersedes the previous one (single scan in flight)", async () => {
    const client = new FakeClient();
    let releaseFirst!: (value: FindingsResponse) => void;
    let call = 0;
    client.scanImpl = (signal) => {
      call += 1;
      if (call === 1) {
        return new Promise((resolve) => {
          releaseFirst = resolve;
          signal?.addEventListener("abort", () => resolve(twoFindings));
        });
      }
      return Promise.resolve(emptyFindings);
    };
    const { controller } = makeController(client);
    const first = controller.scanCurrentPage();
    await nextTick(); // first scan reaches client.scan and parks
    const second = controller.scanCurrentPage();
    await nextTick();
    releaseFirst(twoFindings); // stale response arrives late
    await Promise.all([first, second]);
    // the stale first response must not clobber the newer empty result
    expect(controller.state.phase).toBe("done");
    expect(controller.state.findings).toHaveLength(0);
  });

  it("clicking a finding asks the page to highlight its span", async () => {
    const client = new FakeClient();
    const { controller, highlighted } = makeController(client);
    await controller.scanCurrentPage();
    controller.highlight(0);
    controller.highlight(1);
    expect(highlighted).toEqual([120, 340]);
  });
});

describe("expand_similar", () => {
  it("uses embedded examples without fetching", async () => {
    const client = new FakeClient();
    const { controller } = makeController(client);
    await controller.scanCurrentPage();
    await controller.toggleSimilar(0); // findingDark has 3 embedded examples
    expect(client.similarCalls).toHaveLength(0);
    const html = renderPanel(controller.state);
    expect(html.match(/similar-row/g)).toHaveLength(3);
  });

  it("lazy-fetches when the finding has no embedded examples", async () => {
    const client = new FakeClient();
    const { controller } = makeController(client);
    await controller.scanCurrentPage();
    await controller.toggleSimilar(1); // findingMulti embeds none
    expect(client.similarCalls).toHaveLength(1);
    expect(client.similarCalls[0].text).toBe(findingMulti.chunk.text);
    const html = renderPanel(controller.state);
    expect(html.match(/similar-row/g)).toHaveLength(3); // rows match the mock payload
  });

  it("fetch failure shows an inline error within the panel", async () => {
    const client = new FakeClient();
    client.similarImpl = async () => {
      throw new ServiceError("similar lookup failed (503)", 503, true);
    };
    const { controller } = makeController(client);
    await controller.scanCurrentPage();
    await controller.toggleSimilar(1);
    const html = renderPanel(controller.state);
    expect(html).toContain("could not load similar examples");
    expect(controller.state.phase).toBe("done"); // panel itself unaffected
  });

  it("toggles closed without refetching", async () => {
    const client = new FakeClient();
    const { controller } = makeController(client);
    await controller.scanCurrentPage();
    await controller.toggleSimilar(1);
    await controller.toggleSimilar(1); // close
    expect(renderPanel(controller.state)).toContain("show similar clauses");
    await controller.toggleSimilar(1); // reopen: examples cached
    expect(client.similarCalls).toHaveLength(1);
  });
});
