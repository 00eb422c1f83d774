/** Side-panel entry point: wires the controller to the DOM and to the
 * content script (page HTML extraction + clause highlighting). */

import { DEFAULT_BASE_URL, ServiceClient } from "./api";
import { PanelController } from "./controller";
import { renderPanel } from "./render";
import type { Finding } from "./types";

async function activeTabId(): Promise<number> {
  const [tab] = await chrome.tabs.query({ active: true, currentWindow: true });
  if (tab?.id === undefined) throw new Error("no active tab");
  return tab.id;
}

async function getPageHtml(): Promise<string> {
  const tabId = await activeTabId();
  const response = await chrome.tabs.sendMessage(tabId, { type: "getPageHtml" });
  if (!response?.html) throw new Error("page did not respond");
  return response.html as string;
}

async function highlightInPage(finding: Finding): Promise<void> {
  const tabId = await activeTabId();
  await chrome.tabs.sendMessage(tabId, {
    type: "highlightClause",
    span: finding.chunk.char_span,
    text: finding.chunk.text,
  });
}

async function main(): Promise<void> {
  const stored = await chrome.storage.sync.get({ baseUrl: DEFAULT_BASE_URL });
  const client = new ServiceClient(stored.baseUrl as string);
  const root = document.getElementById("root")!;

  const controller = new PanelController({
    client,
    getPageHtml,
    onState: (state) => {
      root.innerHTML = renderPanel(state);
    },
    highlight: (finding) => void highlightInPage(finding),
  });

  root.innerHTML = renderPanel(controller.state);
  root.addEventListener("click", (event) => {
    const target = (event.target as HTMLElement).closest<HTMLElement>("[data-action]");
    if (!target) return;
    const index = Number(target.dataset.index ?? -1);
    switch (target.dataset.action) {
      case "scan":
      case "retry":
        void controller.scanCurrentPage();
        break;
      case "toggle-similar":
        void controller.toggleSimilar(index);
        break;
      case "highlight":
        controller.highlight(index);
        break;
    }
  });
}

void main();
