/** Pure render functions: panel state in, HTML string out.
 *
 * Nothing here touches the DOM or the network, so snapshots of these
 * strings fully capture the UI for a given set of API responses. */

import type {
  Category,
  Finding,
  LabelDetail,
  PanelState,
  SimilarExample,
  SimilarPanelState,
} from "./types";

const CATEGORY_NAMES: Record<Category, string> = {
  illegal: "Illegal",
  dark: "Dark",
  gray: "Gray",
};

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function excerpt(text: string, maxChars = 220): string {
  if (text.length <= maxChars) return text;
  return text.slice(0, maxChars - 1).trimEnd() + "…";
}

/** Categories that actually predicted at least one label. */
export function findingCategories(finding: Finding): Category[] {
  const out: Category[] = [];
  for (const category of ["illegal", "dark", "gray"] as Category[]) {
    if ((finding.labels[category] ?? []).length > 0) out.push(category);
  }
  return out;
}

function detailFor(finding: Finding, code: string): LabelDetail | undefined {
  return finding.label_details.find((d) => d.code === code);
}

export function renderBadges(finding: Finding): string {
  const badges = findingCategories(finding)
    .map(
      (category) =>
        `<span class="badge badge-${category}" data-category="${category}">${CATEGORY_NAMES[category]}</span>`,
    )
    .join("");
  const errorBadge = finding.errors.length
    ? `<span class="badge badge-error" title="${escapeHtml(
        finding.errors.map((e) => `${e.task}: ${e.error}`).join("\n"),
      )}">partial</span>`
    : "";
  return badges + errorBadge;
}

export function renderLabelChips(finding: Finding): string {
  const chips: string[] = [];
  for (const category of findingCategories(finding)) {
    for (const code of finding.labels[category] ?? []) {
      const detail = detailFor(finding, code);
      const name = detail ? detail.display_name : code;
      const explanation = detail ? escapeHtml(detail.explanation) : "";
      const link = detail?.legal_ref_url
        ? ` <a class="legal-ref" href="${escapeHtml(detail.legal_ref_url)}" target="_blank" rel="noreferrer">ley</a>`
        : "";
      chips.push(
        `<li class="chip chip-${category}" title="${explanation}">` +
          `<span class="chip-code">${escapeHtml(code)}</span> ${escapeHtml(name)}${link}</li>`,
      );
    }
  }
  return chips.length ? `<ul class="chips">${chips.join("")}</ul>` : "";
}

export function renderExplanations(finding: Finding): string {
  const rows = finding.label_details
    .map(
      (detail) =>
        `<p class="explanation"><strong>${escapeHtml(detail.code)}</strong>: ${escapeHtml(
          detail.explanation,
        )}</p>`,
    )
    .join("");
  return rows;
}

export function renderSimilarList(examples: SimilarExample[]): string {
  if (examples.length === 0) {
    return `<p class="similar-empty">no similar examples</p>`;
  }
  const rows = examples
    .map(
      (example) =>
        `<li class="similar-row">` +
        `<span class="similar-relevance">${example.relevance.toFixed(2)}</span> ` +
        `<span class="similar-labels">[${example.labels.map(escapeHtml).join(", ")}]</span> ` +
        `<span class="similar-text">${escapeHtml(excerpt(example.text, 160))}</span>` +
        `</li>`,
    )
    .join("");
  return `<ul class="similar-list">${rows}</ul>`;
}

export function renderSimilarPanel(state: SimilarPanelState): string {
  if (!state.open) return "";
  if (state.loading) return `<div class="similar-panel loading">loading similar examples…</div>`;
  if (state.error) {
    return `<div class="similar-panel error">could not load similar examples: ${escapeHtml(
      state.error,
    )}</div>`;
  }
  return `<div class="similar-panel">${renderSimilarList(state.examples ?? [])}</div>`;
}

export function renderFindingCard(
  finding: Finding,
  index: number,
  similar: SimilarPanelState,
): string {
  const [start, end] = finding.chunk.char_span;
  return (
    `<article class="finding" data-index="${index}" data-span-start="${start}" data-span-end="${end}">` +
    `<header class="finding-header">${renderBadges(finding)}</header>` +
    `<blockquote class="finding-excerpt" data-action="highlight" data-index="${index}">` +
    escapeHtml(excerpt(finding.chunk.text)) +
    `</blockquote>` +
    renderLabelChips(finding) +
    renderExplanations(finding) +
    `<button class="similar-toggle" data-action="toggle-similar" data-index="${index}">` +
    (similar.open ? "hide similar clauses" : "show similar clauses") +
    `</button>` +
    renderSimilarPanel(similar) +
    `</article>`
  );
}

export function renderPanel(state: PanelState): string {
  switch (state.phase) {
    case "idle":
      return `<div class="panel idle"><button data-action="scan">Scan this page</button></div>`;
    case "scanning":
      return `<div class="panel scanning"><p class="progress">scanning…</p></div>`;
    case "error": {
      const partialNote = state.findings.length
        ? `<p class="partial-note">showing ${state.findings.length} partial finding(s)</p>`
        : "";
      const cards = state.findings
        .map((finding, i) => renderFindingCard(finding, i, state.similar[i]))
        .join("");
      return (
        `<div class="panel error">` +
        `<p class="error-message">${escapeHtml(state.error ?? "scan failed")}</p>` +
        (state.retryable ? `<button data-action="retry">Retry</button>` : "") +
        partialNote +
        cards +
        `</div>`
      );
    }
    case "done": {
      if (state.findings.length === 0) {
        return (
          `<div class="panel done empty"><p class="no-issues">No issues detected on this page.</p>` +
          `<button data-action="scan">Scan again</button></div>`
        );
      }
      const cards = state.findings
        .map((finding, i) => renderFindingCard(finding, i, state.similar[i]))
        .join("");
      return (
        `<div class="panel done">` +
        `<p class="summary">${state.findings.length} potentially abusive clause(s) found.</p>` +
        `<button data-action="scan">Scan again</button>` +
        cards +
        `</div>`
      );
    }
  }
}
