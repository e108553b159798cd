/** HTML rendering for the DAG view: pure string builders over the view model. */

import { DagViewModel, describeCitation, type NodeView } from "./viewmodel.js";
import type { FinalResponse } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function stateBadge(state: string): string {
  return `<span class="badge badge-${state}">${state}</span>`;
}

export function renderNode(vm: DagViewModel, node: NodeView): string {
  const rows = vm
    .citationRows(node.node_id)
    .map(
      (row) =>
        `<li class="evidence evidence-${row.kind}${row.contributing ? "" : " non-contributing"}">` +
        `<span class="evidence-kind">${row.kind}</span> ` +
        `${escapeHtml(row.locator)}` +
        (row.similarity !== null
          ? ` <span class="similarity">sim ${row.similarity.toFixed(3)}</span>`
          : "") +
        `</li>`,
    )
    .join("");
  const annotations = node.annotations.length
    ? `<div class="annotations">${node.annotations.map(escapeHtml).join(", ")}</div>`
    : "";
  const marker =
    node.state === "discarded"
      ? `<div class="non-contributing-note">non-contributing (discarded)</div>`
      : "";
  return (
    `<article class="node node-${node.state}" data-node-id="${node.node_id}" data-layer="${node.layer}">` +
    `<header>${stateBadge(node.state)} <strong>${node.node_id}</strong></header>` +
    `<p class="hypothesis">${escapeHtml(node.hypothesis)}</p>` +
    marker +
    annotations +
    `<details><summary>evidence (${node.evidence_trail.length})</summary><ul>${rows}</ul></details>` +
    (node.report
      ? `<details><summary>report</summary><pre>${escapeHtml(node.report)}</pre></details>`
      : "") +
    `</article>`
  );
}

export function renderDag(vm: DagViewModel): string {
  const byLayer = new Map<number, NodeView[]>();
  for (const node of vm.renderList()) {
    const bucket = byLayer.get(node.layer) ?? [];
    bucket.push(node);
    byLayer.set(node.layer, bucket);
  }
  const layers = [...byLayer.entries()]
    .sort(([a], [b]) => a - b)
    .map(
      ([layer, nodes]) =>
        `<section class="layer" data-layer="${layer}">` +
        nodes.map((n) => renderNode(vm, n)).join("") +
        `</section>`,
    )
    .join("");
  return `<div class="dag">${layers}</div>`;
}

export function renderFinal(vm: DagViewModel): string {
  const final: FinalResponse | null = vm.finalResponse;
  if (!final) return `<div class="final final-pending">awaiting final response</div>`;
  const prediction = final.prediction ?? {};
  let headline: string;
  if (prediction["kind"] === "numeric") {
    headline = `${prediction["metric_name"]} = ${prediction["value_text"]}`;
  } else if (prediction["kind"] === "comparative") {
    headline = `best model: ${prediction["answer_label"]}`;
  } else {
    headline = "no prediction (no evidence)";
  }
  const uncertainty = final.uncertainty
    ? ` <span class="uncertainty">[${final.uncertainty[0]} .. ${final.uncertainty[1]}]</span>`
    : "";
  const citations = final.citations
    .map((citation) => {
      const owners = vm.nodesForCitation(citation);
      const links = owners
        .map((id) => `<a href="#" class="citation-link" data-node-id="${id}">${id}</a>`)
        .join(" ");
      return `<li>${escapeHtml(describeCitation(citation))} ${links}</li>`;
    })
    .join("");
  return (
    `<div class="final">` +
    `<h3>${escapeHtml(headline)}${uncertainty}</h3>` +
    `<p class="rationale">${escapeHtml(final.rationale)}</p>` +
    `<ul class="citations">${citations}</ul>` +
    `</div>`
  );
}
