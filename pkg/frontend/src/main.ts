// Console entry point: a small hash-routed SPA with an annotator mode
// (task queue + four-task form) and a researcher mode (dashboards).

import { Api, type ApiError, type TaskView } from "./api.js";
import { orderTasks } from "./order.js";
import { TaskForm } from "./views/task-form.js";
import {
  renderAlignmentDashboard,
  renderCodingDashboard,
  renderCurationDashboard,
  renderReviewDashboard,
  renderSamplingDashboard,
} from "./views/dashboards.js";

const app = document.getElementById("app") as HTMLElement;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

function tokenPrompt(kind: string, onToken: (token: string) => void): void {
  app.replaceChildren();
  const input = el("input", {
    type: "password",
    placeholder: `${kind} bearer token`,
  }) as HTMLInputElement;
  const go = el("button", { type: "button" }, "Enter") as HTMLButtonElement;
  go.addEventListener("click", () => {
    if (input.value.trim()) {
      sessionStorage.setItem(`cgtkit-token-${kind}`, input.value.trim());
      onToken(input.value.trim());
    }
  });
  app.append(
    el(
      "div",
      { class: "token-prompt" },
      el("h1", {}, "cgtkit console"),
      el("p", {}, `Paste your ${kind} token to continue.`),
      input,
      go
    )
  );
}

function storedToken(kind: string): string | null {
  return sessionStorage.getItem(`cgtkit-token-${kind}`);
}

async function annotatorMode(token: string): Promise<void> {
  const api = new Api("", token);
  app.replaceChildren(el("p", {}, "loading tasks…"));
  let annotator: string;
  let tasks: TaskView[];
  try {
    const feed = await api.tasks();
    annotator = feed.annotator;
    tasks = orderTasks(feed.tasks, feed.annotator);
  } catch (error) {
    const apiError = error as ApiError;
    if (apiError.status === 401 || apiError.status === 403) {
      sessionStorage.removeItem("cgtkit-token-annotator");
      tokenPrompt("annotator", (t) => void annotatorMode(t));
      return;
    }
    app.replaceChildren(el("p", { class: "error" }, apiError.message));
    return;
  }
  if (tasks.length === 0) {
    app.replaceChildren(
      el("div", { class: "done" }, el("h1", {}, "All done"), el("p", {}, "No topics left in your queue."))
    );
    return;
  }
  const current = tasks[0] as TaskView;
  app.replaceChildren(
    el(
      "p",
      { class: "progress" },
      `${annotator}: ${tasks.length} topic${tasks.length === 1 ? "" : "s"} remaining ` +
        `(stage ${current.stage + 1})`
    )
  );
  const host = el("main", { class: "task" });
  app.append(host);
  new TaskForm(api, annotator, current, host, () => void annotatorMode(token)).render();
}

async function researcherMode(token: string): Promise<void> {
  const api = new Api("", token);
  app.replaceChildren();
  const nav = el("nav", { class: "tabs" });
  const panel = el("div", { class: "panel" });
  const tabs: [string, (api: Api, panel: HTMLElement) => Promise<void>][] = [
    ["Alignment", renderAlignmentDashboard],
    ["Term curation", renderCurationDashboard],
    ["Review", renderReviewDashboard],
    ["Sampling", renderSamplingDashboard],
    ["Coding", renderCodingDashboard],
  ];
  for (const [name, render] of tabs) {
    const button = el("button", { type: "button" }, name) as HTMLButtonElement;
    button.addEventListener("click", () => {
      nav.querySelectorAll("button").forEach((b) => b.classList.remove("active"));
      button.classList.add("active");
      void render(api, panel).catch((error: unknown) => {
        const apiError = error as ApiError;
        if (apiError.status === 401 || apiError.status === 403) {
          sessionStorage.removeItem("cgtkit-token-researcher");
          tokenPrompt("researcher", (t) => void researcherMode(t));
        } else {
          panel.replaceChildren(el("p", { class: "error" }, apiError.message));
        }
      });
    });
    nav.append(button);
  }
  app.append(el("h1", {}, "Researcher console"), nav, panel);
  (nav.querySelector("button") as HTMLButtonElement).click();
}

function route(): void {
  const hash = location.hash || "#/annotate";
  if (hash.startsWith("#/review")) {
    const token = storedToken("researcher");
    if (token) void researcherMode(token);
    else tokenPrompt("researcher", (t) => void researcherMode(t));
  } else {
    const token = storedToken("annotator");
    if (token) void annotatorMode(token);
    else tokenPrompt("annotator", (t) => void annotatorMode(t));
  }
}

window.addEventListener("hashchange", route);
route();
