/** DAG view model: a pure fold of snapshot/event wire data.
 *
 * Every displayed value traces to a snapshot or event field; the model
 * fabricates nothing. Folding the full event stream of a conversation
 * must reproduce the snapshot endpoint's state field for field, which is
 * what the fidelity tests assert.
 */

import type {
  EdgeSnapshot,
  EvidenceItem,
  FinalResponse,
  NodeSnapshot,
  NodeStateName,
  Snapshot,
  WireEvent,
} from "./types.js";

export interface NodeView extends NodeSnapshot {
  parent: string | null;
  /** topological layer by spawn depth (creation round within its turn) */
  layer: number;
  turn: number;
}

export interface CitationRow {
  kind: string;
  locator: string;
  similarity: number | null;
  contributing: boolean;
}

export class DagViewModel {
  conversationId = "";
  query: Record<string, unknown> = {};
  turns = 0;
  finalResponse: FinalResponse | null = null;
  cursor = 0;
  private nodes = new Map<string, NodeView>();
  private order: string[] = [];

  /** Build from a snapshot; layers derive from edges (parent depth + 1). */
  static fromSnapshot(snapshot: Snapshot): DagViewModel {
    const vm = new DagViewModel();
    vm.conversationId = snapshot.conversation_id;
    vm.query = snapshot.query;
    vm.turns = snapshot.turns;
    vm.finalResponse = snapshot.final_response;
    const parents = new Map<string, string | null>(
      snapshot.edges.map((e: EdgeSnapshot) => [e.child, e.parent]),
    );
    const depth = (id: string): number => {
      const parent = parents.get(id) ?? null;
      return parent === null ? 0 : depth(parent) + 1;
    };
    for (const node of snapshot.nodes) {
      vm.order.push(node.node_id);
      vm.nodes.set(node.node_id, {
        ...node,
        parent: parents.get(node.node_id) ?? null,
        layer: depth(node.node_id),
        turn: 0,
      });
    }
    return vm;
  }

  /** Apply one wire event; events must arrive in seq order per cursor. */
  applyEvent(event: WireEvent): void {
    if (event.seq <= this.cursor) return; // replay-safe: skip duplicates
    this.cursor = event.seq;
    const payload = event.payload as Record<string, never>;
    switch (event.type) {
      case "conversation_started": {
        this.conversationId = payload["conversation_id"];
        this.query = payload["query"];
        break;
      }
      case "turn_started": {
        this.turns = payload["turn"];
        this.finalResponse = null;
        break;
      }
      case "thought_created": {
        const nodeId = payload["node_id"] as string;
        this.order.push(nodeId);
        this.nodes.set(nodeId, {
          node_id: nodeId,
          hypothesis: payload["hypothesis"],
          method: payload["method"],
          tools: payload["tools"] ?? [],
          lookups: payload["lookups"] ?? [],
          state: "active",
          evidence_trail: [],
          report: null,
          annotations: [],
          parent: payload["parent"] ?? null,
          layer: this.layerFor(payload["parent"] ?? null, payload["round"] ?? 0),
          turn: payload["turn"] ?? this.turns,
        });
        break;
      }
      case "tool_invoked": {
        const node = this.nodes.get(payload["node_id"] as string);
        if (!node) break;
        for (const item of (payload["evidence"] as EvidenceItem[] | undefined) ?? []) {
          node.evidence_trail.push({
            kind: item.kind,
            content: item.content ?? {},
            citation: item.citation ?? {},
            flags: item.flags ?? {},
          });
        }
        const annotation = payload["annotation"] as string | undefined;
        if (annotation) node.annotations.push(annotation);
        break;
      }
      case "state_changed": {
        const node = this.nodes.get(payload["node_id"] as string);
        if (!node) break;
        node.state = payload["to"] as NodeStateName;
        node.report =
          node.state === "completed" ? ((payload["report"] as string) ?? null) : null;
        for (const annotation of (payload["annotations"] as string[] | undefined) ?? []) {
          node.annotations.push(annotation);
        }
        break;
      }
      case "aggregated": {
        this.finalResponse = payload["final_response"];
        break;
      }
      default:
        break; // unknown event types are ignored, never invented
    }
  }

  applyEvents(events: WireEvent[]): void {
    for (const event of events) this.applyEvent(event);
  }

  private layerFor(parent: string | null, round: number): number {
    if (parent !== null) {
      const parentNode = this.nodes.get(parent);
      if (parentNode) return parentNode.layer + 1;
    }
    return round;
  }

  get allTerminal(): boolean {
    return (
      this.order.length > 0 &&
      [...this.nodes.values()].every((n) => n.state !== "active")
    );
  }

  /** Nodes in stable render order: layer, then node id. */
  renderList(): NodeView[] {
    return this.order
      .map((id) => this.nodes.get(id)!)
      .sort((a, b) => a.layer - b.layer || a.node_id.localeCompare(b.node_id));
  }

  node(nodeId: string): NodeView | undefined {
    return this.nodes.get(nodeId);
  }

  /** Snapshot-shaped projection used by the fidelity tests. */
  toNodeSnapshots(): NodeSnapshot[] {
    return [...this.order]
      .sort()
      .map((id) => {
        const { parent, layer, turn, ...wire } = this.nodes.get(id)!;
        return wire;
      });
  }

  /** Evidence detail rows for the citation inspector. */
  citationRows(nodeId: string): CitationRow[] {
    const node = this.nodes.get(nodeId);
    if (!node) return [];
    const contributing = node.state === "completed";
    return node.evidence_trail.map((item) => ({
      kind: item.kind,
      locator: describeCitation(item.citation),
      similarity:
        typeof item.content["similarity"] === "number"
          ? (item.content["similarity"] as number)
          : null,
      contributing,
    }));
  }

  /** Node ids whose trail contains the given final-response citation. */
  nodesForCitation(citation: Record<string, unknown>): string[] {
    const key = stableStringify(citation);
    const out: string[] = [];
    for (const id of this.order) {
      const node = this.nodes.get(id)!;
      if (node.state !== "completed") continue;
      if (node.evidence_trail.some((e) => stableStringify(e.citation) === key)) {
        out.push(id);
      }
    }
    return out;
  }
}

export function describeCitation(citation: Record<string, unknown>): string {
  const source = citation["source"];
  if (source === "corpus") {
    return `${citation["paper_id"]}: ${citation["task"]} / ${citation["language"]} / ${citation["family"]} (${citation["metric"]})`;
  }
  if (source === "kb") {
    const locator = citation["locator"] ? ` @ ${citation["locator"]}` : "";
    return `${citation["paper_id"] ?? citation["doc_id"]}${locator}`;
  }
  if (source === "search") {
    return String(citation["url"] ?? "");
  }
  return stableStringify(citation);
}

export function stableStringify(value: unknown): string {
  if (value === null || typeof value !== "object") return JSON.stringify(value);
  if (Array.isArray(value)) {
    return `[${value.map(stableStringify).join(",")}]`;
  }
  const entries = Object.entries(value as Record<string, unknown>)
    .sort(([a], [b]) => a.localeCompare(b))
    .map(([k, v]) => `${JSON.stringify(k)}:${stableStringify(v)}`);
  return `{${entries.join(",")}}`;
}
