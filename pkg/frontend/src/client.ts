/** Thin fetch client for the conversation service.
 *
 * Issues only the documented endpoints; a 409 on follow-up surfaces as
 * TurnInProgressError so the console can show "turn in progress" instead
 * of failing.
 */

import type { EventsResponse, QueryRequest, Snapshot } from "./types.js";

export class TurnInProgressError extends Error {
  constructor() {
    super("turn in progress");
    this.name = "TurnInProgressError";
  }
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (
  input: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ status: number; json(): Promise<unknown> }>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch as unknown as FetchLike,
  ) {}

  private async request(path: string, init?: Parameters<FetchLike>[1]) {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (response.status === 409) throw new TurnInProgressError();
    if (response.status >= 400) {
      throw new ApiError(response.status, `${init?.method ?? "GET"} ${path}`);
    }
    return response.json();
  }

  async createConversation(query: QueryRequest): Promise<string> {
    const body = await this.request("/conversations", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(query),
    });
    return (body as { conversation_id: string }).conversation_id;
  }

  async getSnapshot(conversationId: string): Promise<Snapshot> {
    return (await this.request(`/conversations/${conversationId}`)) as Snapshot;
  }

  async pollEvents(
    conversationId: string,
    cursor: number,
    waitSeconds = 0,
  ): Promise<EventsResponse> {
    const params = `cursor=${cursor}&wait=${waitSeconds}`;
    return (await this.request(
      `/conversations/${conversationId}/events?${params}`,
    )) as EventsResponse;
  }

  async postFollowUp(conversationId: string, text: string): Promise<void> {
    await this.request(`/conversations/${conversationId}/messages`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ text }),
    });
  }

  async health(): Promise<boolean> {
    try {
      await this.request("/health");
      return true;
    } catch {
      return false;
    }
  }
}
