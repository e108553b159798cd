/** In-memory scripted service implementing the documented wire contract.
 *
 * Serves the frozen conversation fixture over a FetchLike interface:
 * events stream out in batches per cursor poll, follow-ups append the
 * second-turn events, and overlapping follow-ups get 409.
 */

import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";

import type { FetchLike } from "../src/client.js";
import type { Snapshot, WireEvent } from "../src/types.js";

const here = dirname(fileURLToPath(import.meta.url));

export interface ConversationFixture {
  conversation_id: string;
  events_turn1: WireEvent[];
  snapshot_turn1: Snapshot;
  events_all: WireEvent[];
  snapshot_final: Snapshot;
}

export function loadFixture(): ConversationFixture {
  return JSON.parse(
    readFileSync(join(here, "fixtures", "conversation.json"), "utf-8"),
  ) as ConversationFixture;
}

interface Options {
  batchSize?: number;
  /** request indexes (1-based) that fail with a network error */
  failOnRequests?: Set<number>;
  /** keep the first turn "in flight" until this many polls have happened */
  busyUntilPoll?: number;
}

export class ScriptedService {
  readonly requests: string[] = [];
  private available = 0;
  private conversationStarted = false;
  private turn = 0;
  private requestCount = 0;
  private polls = 0;

  constructor(
    private readonly fixture: ConversationFixture,
    private readonly options: Options = {},
  ) {}

  private get turn1Count(): number {
    return this.fixture.events_turn1.length;
  }

  get inFlight(): boolean {
    return (
      (this.turn === 1 && this.available < this.turn1Count) ||
      (this.turn === 2 && this.available < this.fixture.events_all.length)
    );
  }

  fetch: FetchLike = async (input, init) => {
    this.requestCount += 1;
    if (this.options.failOnRequests?.has(this.requestCount)) {
      throw new TypeError("network error (scripted)");
    }
    const url = new URL(input, "http://scripted.test");
    const method = init?.method ?? "GET";
    this.requests.push(`${method} ${url.pathname}`);
    const cid = this.fixture.conversation_id;

    if (method === "POST" && url.pathname === "/conversations") {
      this.conversationStarted = true;
      this.turn = 1;
      this.available = 0;
      return ok(201, { conversation_id: cid, status: "running" });
    }
    if (!this.conversationStarted || !url.pathname.includes(cid)) {
      return ok(404, { detail: "unknown conversation" });
    }
    if (method === "POST" && url.pathname === `/conversations/${cid}/messages`) {
      if (this.inFlight) return ok(409, { detail: "turn in progress" });
      this.turn = 2;
      return ok(202, { conversation_id: cid, turn: 2, status: "running" });
    }
    if (method === "GET" && url.pathname === `/conversations/${cid}/events`) {
      this.polls += 1;
      const cursor = Number(url.searchParams.get("cursor") ?? "0");
      const limit = this.turn === 2 ? this.fixture.events_all.length : this.turn1Count;
      const stalled =
        this.options.busyUntilPoll !== undefined &&
        this.polls < this.options.busyUntilPoll;
      if (!stalled) {
        this.available = Math.min(
          this.available + (this.options.batchSize ?? 7),
          limit,
        );
      }
      const events = this.fixture.events_all
        .slice(0, this.available)
        .filter((e) => e.seq > cursor);
      const nextCursor = events.length ? events[events.length - 1].seq : cursor;
      return ok(200, {
        conversation_id: cid,
        events,
        next_cursor: nextCursor,
      });
    }
    if (method === "GET" && url.pathname === `/conversations/${cid}`) {
      const snapshot =
        this.turn === 2 ? this.fixture.snapshot_final : this.fixture.snapshot_turn1;
      return ok(200, { ...snapshot, in_flight: this.inFlight });
    }
    return ok(404, { detail: "unknown path" });
  };
}

function ok(status: number, body: unknown) {
  return Promise.resolve({
    status,
    json: () => Promise.resolve(body),
  });
}
