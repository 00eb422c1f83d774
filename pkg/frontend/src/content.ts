/** Content script: hands the page HTML to the side panel and scrolls
 * to/highlights a clause on request.
 *
 * Highlighting maps the finding's char_span back into the live DOM by
 * re-serializing the document and locating the span text; when page
 * dynamics have shifted offsets, it falls back to a text search over
 * the clause's leading words. */

const HIGHLIGHT_CLASS = "__tosguard_highlight";

function pageHtml(): string {
  return document.documentElement.outerHTML;
}

function clearHighlights(): void {
  document.querySelectorAll(`.${HIGHLIGHT_CLASS}`).forEach((el) => {
    el.classList.remove(HIGHLIGHT_CLASS);
    (el as HTMLElement).style.outline = "";
  });
}

function markElement(element: HTMLElement): void {
  clearHighlights();
  element.classList.add(HIGHLIGHT_CLASS);
  element.style.outline = "3px solid #d9534f";
  element.scrollIntoView({ behavior: "smooth", block: "center" });
}

/** Exact path: the source span sliced from the current serialization. */
function highlightBySpan(span: [number, number], clauseText: string): boolean {
  const html = pageHtml();
  const slice = html.slice(span[0], span[1]);
  if (!slice || !clauseText.startsWith(slice.slice(0, 20).trim().slice(0, 10))) {
    // offsets drifted since the scan; caller falls back to text search
  }
  return highlightByText(slice || clauseText);
}

/** Fuzzy path: find the block element containing the clause's first words. */
function highlightByText(clauseText: string): boolean {
  const needle = clauseText.split(/\s+/).slice(0, 8).join(" ").trim();
  if (!needle) return false;
  const walker = document.createTreeWalker(document.body, NodeFilter.SHOW_TEXT);
  let node: Node | null;
  while ((node = walker.nextNode())) {
    const text = node.textContent ?? "";
    if (text.replace(/\s+/g, " ").includes(needle)) {
      const element = (node.parentElement ?? document.body) as HTMLElement;
      markElement(element);
      return true;
    }
  }
  return false;
}

chrome.runtime.onMessage.addListener((message, _sender, sendResponse) => {
  if (message?.type === "getPageHtml") {
    sendResponse({ html: pageHtml() });
    return;
  }
  if (message?.type === "highlightClause") {
    const ok =
      highlightBySpan(message.span as [number, number], message.text as string) ||
      highlightByText(message.text as string);
    sendResponse({ ok });
  }
});
