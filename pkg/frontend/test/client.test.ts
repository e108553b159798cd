import { describe, expect, it } from "vitest";

import { ApiClient, ApiError, TurnInProgressError } from "../src/client.js";
import type { FetchLike } from "../src/client.js";

function stub(status: number, body: unknown, calls: string[]): FetchLike {
  return (input, init) => {
    calls.push(`${init?.method ?? "GET"} ${input}`);
    return Promise.resolve({ status, json: () => Promise.resolve(body) });
  };
}

describe("ApiClient", () => {
  it("posts queries to /conversations and returns the id", async () => {
    const calls: string[] = [];
    const client = new ApiClient(
      "http://svc", stub(201, { conversation_id: "c42" }, calls),
    );
    const id = await client.createConversation({ text: "", task: "t" });
    expect(id).toBe("c42");
    expect(calls).toEqual(["POST http://svc/conversations"]);
  });

  it("encodes cursor and wait into the events poll", async () => {
    const calls: string[] = [];
    const client = new ApiClient(
      "http://svc",
      stub(200, { conversation_id: "c", events: [], next_cursor: 5 }, calls),
    );
    const response = await client.pollEvents("c", 5, 2);
    expect(response.next_cursor).toBe(5);
    expect(calls).toEqual(["GET http://svc/conversations/c/events?cursor=5&wait=2"]);
  });

  it("maps 409 to TurnInProgressError", async () => {
    const client = new ApiClient("http://svc", stub(409, {}, []));
    await expect(client.postFollowUp("c", "hi")).rejects.toBeInstanceOf(
      TurnInProgressError,
    );
  });

  it("maps other failures to ApiError with status", async () => {
    const client = new ApiClient("http://svc", stub(404, {}, []));
    await expect(client.getSnapshot("missing")).rejects.toMatchObject({
      name: "ApiError",
      status: 404,
    });
  });

  it("health degrades to false on failure", async () => {
    const broken: FetchLike = () => Promise.reject(new TypeError("down"));
    const client = new ApiClient("http://svc", broken);
    expect(await client.health()).toBe(false);
  });
});
