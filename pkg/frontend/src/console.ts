/** Query console controller: submit, stream, resume, follow up.
 *
 * DOM-free so the polling/resumption logic is directly testable; the
 * browser layer subscribes to onChange and re-renders. Connection loss
 * retries from the last applied cursor, so no event is skipped or applied
 * twice.
 */

import { ApiClient, TurnInProgressError } from "./client.js";
import { DagViewModel } from "./viewmodel.js";
import type { QueryRequest } from "./types.js";

export type ConsoleStatus =
  | "idle"
  | "running"
  | "done"
  | "reconnecting"
  | "turn-in-progress";

export interface ConsoleOptions {
  pollWaitSeconds?: number;
  retryDelayMs?: number;
  maxIdlePolls?: number;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export class QueryConsole {
  readonly vm = new DagViewModel();
  status: ConsoleStatus = "idle";
  conversationId: string | null = null;
  lastError: string | null = null;
  private listeners: Array<() => void> = [];

  constructor(
    private readonly client: ApiClient,
    private readonly options: ConsoleOptions = {},
  ) {}

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  get followUpEnabled(): boolean {
    return this.status === "done" && this.conversationId !== null;
  }

  async submit(query: QueryRequest): Promise<void> {
    this.conversationId = await this.client.createConversation(query);
    this.status = "running";
    this.notify();
    await this.streamUntilAggregated();
  }

  async followUp(text: string): Promise<void> {
    if (!this.conversationId) throw new Error("no conversation to follow up");
    try {
      await this.client.postFollowUp(this.conversationId, text);
    } catch (error) {
      if (error instanceof TurnInProgressError) {
        this.status = "turn-in-progress";
        this.notify();
        return;
      }
      throw error;
    }
    this.status = "running";
    this.notify();
    await this.streamUntilAggregated();
  }

  /** Poll the event stream from the current cursor until a turn completes. */
  private async streamUntilAggregated(): Promise<void> {
    const sleep = this.options.sleep ?? defaultSleep;
    const wait = this.options.pollWaitSeconds ?? 1;
    const maxIdle = this.options.maxIdlePolls ?? 200;
    let idlePolls = 0;
    let sawAggregate = false;
    while (!sawAggregate && idlePolls < maxIdle) {
      let response;
      try {
        response = await this.client.pollEvents(
          this.conversationId!,
          this.vm.cursor,
          wait,
        );
      } catch (error) {
        this.status = "reconnecting";
        this.lastError = String(error);
        this.notify();
        await sleep(this.options.retryDelayMs ?? 250);
        continue; // resume from the same cursor: nothing lost or duplicated
      }
      if (this.status === "reconnecting") {
        this.status = "running";
        this.lastError = null;
      }
      if (response.events.length === 0) {
        idlePolls += 1;
        continue;
      }
      idlePolls = 0;
      sawAggregate = response.events.some((e) => e.type === "aggregated");
      this.vm.applyEvents(response.events);
      this.notify();
    }
    this.status = sawAggregate ? "done" : "idle";
    this.notify();
  }
}
