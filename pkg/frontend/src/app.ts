/** Browser bootstrap: wires the console controller to the page. */

import { ApiClient } from "./client.js";
import { QueryConsole } from "./console.js";
import { renderDag, renderFinal } from "./render.js";

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

export function bootstrap(baseUrl: string = ""): QueryConsole {
  const client = new ApiClient(baseUrl || window.location.origin);
  const console_ = new QueryConsole(client);

  const statusEl = el<HTMLSpanElement>("status");
  const dagEl = el<HTMLDivElement>("dag-view");
  const finalEl = el<HTMLDivElement>("final-view");
  const followForm = el<HTMLFormElement>("follow-up-form");
  const followInput = el<HTMLInputElement>("follow-up-text");
  const followButton = el<HTMLButtonElement>("follow-up-send");

  console_.onChange(() => {
    statusEl.textContent = console_.status + (console_.lastError ? " (retrying)" : "");
    statusEl.className = `status status-${console_.status}`;
    dagEl.innerHTML = renderDag(console_.vm);
    finalEl.innerHTML = renderFinal(console_.vm);
    followButton.disabled = !console_.followUpEnabled;
    for (const link of dagEl.ownerDocument.querySelectorAll(".citation-link")) {
      link.addEventListener("click", (event) => {
        event.preventDefault();
        const nodeId = (link as HTMLElement).dataset["nodeId"];
        const target = dagEl.querySelector(`[data-node-id="${nodeId}"]`);
        target?.scrollIntoView({ behavior: "smooth", block: "center" });
      });
    }
  });

  const queryForm = el<HTMLFormElement>("query-form");
  queryForm.addEventListener("submit", (event) => {
    event.preventDefault();
    const query = {
      text: el<HTMLInputElement>("query-text").value,
      task: el<HTMLInputElement>("query-task").value,
      language: el<HTMLInputElement>("query-language").value || null,
      model_family: el<HTMLInputElement>("query-family").value || null,
      query_type: el<HTMLSelectElement>("query-type").value,
    };
    void console_.submit(query);
  });

  followForm.addEventListener("submit", (event) => {
    event.preventDefault();
    const text = followInput.value;
    followInput.value = "";
    void console_.followUp(text);
  });

  return console_;
}

declare global {
  interface Window {
    tmlpredictBootstrap: typeof bootstrap;
  }
}

if (typeof window !== "undefined") {
  window.tmlpredictBootstrap = bootstrap;
}
