// The four-task annotation form. Control enablement follows src/rules.ts:
// choosing a coherence score reshapes the rest of the form (issue options,
// label slots, forced relatedness) before any server round trip.

import type { Api, ApiError, TaskView } from "../api.js";
import {
  COHERENCE_LABELS,
  ISSUE_LABELS,
  RELATEDNESS_LABELS,
  applyEnablement,
  emptyForm,
  enablement,
  toPayload,
  validate,
  type Coherence,
  type FormState,
  type Issue,
  type Relatedness,
} from "../rules.js";

const GUIDELINES: Record<string, string> = {
  coherence:
    "3: all five posts discuss the same subject. 2: three or four do. " +
    "1: at most two are related, or nothing connects.",
  issue:
    "Chained: two subjects. Intruded: one subject plus unrelated posts. " +
    "Random: no connections (incoherent topics only). Mark the post numbers.",
  labels: "One label when coherent, up to two when average, none when incoherent.",
  relatedness:
    "How the subtopic relates to its main topic. Incoherent subtopics are " +
    "recorded as Not related.",
};

function draftKey(annotator: string, topicId: string): string {
  return `cgtkit-draft:${annotator}:${topicId}`;
}

export function loadDraft(annotator: string, topicId: string): FormState | null {
  try {
    const raw = localStorage.getItem(draftKey(annotator, topicId));
    return raw ? (JSON.parse(raw) as FormState) : null;
  } catch {
    return null;
  }
}

export function saveDraft(annotator: string, topicId: string, state: FormState): void {
  try {
    localStorage.setItem(draftKey(annotator, topicId), JSON.stringify(state));
  } catch {
    // storage unavailable: drafts are best-effort
  }
}

export function clearDraft(annotator: string, topicId: string): void {
  try {
    localStorage.removeItem(draftKey(annotator, topicId));
  } catch {
    // ignore
  }
}

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

function postsBlock(posts: { n: number; id: string; text: string }[]): HTMLElement {
  const list = el("ol", { class: "posts" });
  for (const post of posts) {
    list.append(el("li", {}, el("span", { class: "post-id" }, post.id), " ", post.text));
  }
  return list;
}

export class TaskForm {
  private state: FormState;
  private submitting = false;

  constructor(
    private readonly api: Api,
    private readonly annotator: string,
    private readonly task: TaskView,
    private readonly container: HTMLElement,
    private readonly onDone: () => void
  ) {
    this.state = loadDraft(annotator, task.topic_id) ?? emptyForm(task.parent_id !== null);
    this.state.isSubtopic = task.parent_id !== null;
  }

  render(): void {
    const task = this.task;
    this.container.replaceChildren();
    const header = el(
      "header",
      {},
      el("h2", {}, `${task.parent_id ? "Subtopic" : "Main topic"} ${task.topic_id}`),
      el("p", { class: "terms" }, "Top terms: ", task.terms.join(", "))
    );
    this.container.append(header);

    if (task.parent_context) {
      const parent = el(
        "details",
        { class: "parent-context" },
        el("summary", {}, `Main topic ${task.parent_context.topic_id} (context)`),
        el("p", { class: "terms" }, task.parent_context.terms.join(", ")),
        postsBlock(task.parent_context.posts)
      );
      this.container.append(parent);
    }
    this.container.append(postsBlock(task.posts));
    this.container.append(this.formNode());
  }

  private update(mutate: (s: FormState) => void): void {
    mutate(this.state);
    this.state = applyEnablement(this.state);
    saveDraft(this.annotator, this.task.topic_id, this.state);
    this.render();
  }

  private formNode(): HTMLElement {
    const e = enablement(this.state);
    const form = el("form", { class: "annotation-form" });
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.submit();
    });

    // task one: coherence
    const coherence = el("fieldset", {}, el("legend", {}, "1. Topic coherence"));
    coherence.append(el("p", { class: "hint" }, GUIDELINES["coherence"] ?? ""));
    for (const value of [3, 2, 1] as Coherence[]) {
      const input = el("input", {
        type: "radio",
        name: "coherence",
        value: String(value),
      }) as HTMLInputElement;
      input.checked = this.state.coherence === value;
      input.addEventListener("change", () => this.update((s) => (s.coherence = value)));
      coherence.append(el("label", { class: "choice" }, input, COHERENCE_LABELS[value]));
    }
    form.append(coherence);

    // task two: issue identification
    const issue = el("fieldset", {}, el("legend", {}, "2. Issue identification"));
    issue.append(el("p", { class: "hint" }, GUIDELINES["issue"] ?? ""));
    if (this.state.coherence === null) {
      issue.append(el("p", { class: "disabled-note" }, "Rate coherence first."));
    } else if (e.issueLocked) {
      issue.append(el("p", { class: "locked" }, "N/A — coherent topics have no issue."));
    } else {
      for (const option of e.issueOptions) {
        const input = el("input", {
          type: "radio",
          name: "issue",
          value: option,
        }) as HTMLInputElement;
        input.checked = this.state.issue === option;
        input.addEventListener("change", () => this.update((s) => (s.issue = option as Issue)));
        issue.append(el("label", { class: "choice" }, input, ISSUE_LABELS[option]));
      }
    }
    if (e.postsEnabled && this.state.issue !== null && this.state.issue !== "none") {
      const picker = el("div", { class: "post-picker" }, "Implicated posts: ");
      for (const post of this.task.posts) {
        const box = el("input", { type: "checkbox", value: String(post.n) }) as HTMLInputElement;
        box.checked = this.state.implicatedPosts.includes(post.n);
        box.addEventListener("change", () =>
          this.update((s) => {
            s.implicatedPosts = box.checked
              ? [...s.implicatedPosts, post.n]
              : s.implicatedPosts.filter((p) => p !== post.n);
          })
        );
        picker.append(el("label", { class: "choice" }, box, `Post${post.n}`));
      }
      issue.append(picker);
    }
    form.append(issue);

    // task three: labels
    const labels = el("fieldset", {}, el("legend", {}, "3. Topic label"));
    labels.append(el("p", { class: "hint" }, GUIDELINES["labels"] ?? ""));
    if (e.labelSlots === 0) {
      labels.append(el("p", { class: "locked" }, "N/A — no labels for incoherent topics."));
    } else {
      for (let i = 0; i < e.labelSlots; i++) {
        const input = el("input", {
          type: "text",
          name: `label${i}`,
          placeholder: i === 0 ? "label" : "second label (average only, optional)",
        }) as HTMLInputElement;
        input.value = this.state.labels[i] ?? "";
        input.addEventListener("change", () =>
          this.update((s) => {
            const next = [...s.labels];
            next[i] = input.value;
            s.labels = next;
          })
        );
        labels.append(input);
      }
    }
    form.append(labels);

    // task four: relatedness (subtopics only)
    if (e.relatednessVisible) {
      const rel = el("fieldset", {}, el("legend", {}, "4. Relatedness to the main topic"));
      rel.append(el("p", { class: "hint" }, GUIDELINES["relatedness"] ?? ""));
      if (e.relatednessForced !== null) {
        rel.append(
          el("p", { class: "locked" }, "Not related — forced for incoherent subtopics.")
        );
      } else {
        for (const value of [3, 2, 1, 0] as Relatedness[]) {
          const input = el("input", {
            type: "radio",
            name: "relatedness",
            value: String(value),
          }) as HTMLInputElement;
          input.checked = this.state.relatedness === value;
          input.addEventListener("change", () =>
            this.update((s) => (s.relatedness = value))
          );
          rel.append(el("label", { class: "choice" }, input, RELATEDNESS_LABELS[value]));
        }
      }
      form.append(rel);
    }

    const errors = validate(this.state);
    const errorBox = el("ul", { class: "errors" });
    form.append(errorBox);

    const submit = el("button", { type: "submit" }, "Submit annotation") as HTMLButtonElement;
    submit.disabled = errors.length > 0 || this.submitting;
    form.append(submit);
    return form;
  }

  private showErrors(errors: { field: string | null; message: string }[]): void {
    const box = this.container.querySelector(".errors");
    if (!box) return;
    box.replaceChildren(
      ...errors.map((e) => {
        const item = document.createElement("li");
        item.dataset["field"] = e.field ?? "";
        item.textContent = e.field ? `${e.field}: ${e.message}` : e.message;
        return item;
      })
    );
  }

  private async submit(): Promise<void> {
    const errors = validate(this.state);
    if (errors.length > 0 || this.submitting) {
      this.showErrors(errors);
      return;
    }
    this.submitting = true;
    this.render();
    try {
      await this.api.submitAnnotation(toPayload(this.task.topic_id, this.state));
      clearDraft(this.annotator, this.task.topic_id);
      this.onDone();
    } catch (error) {
      this.submitting = false;
      this.render();
      const apiError = error as ApiError;
      if (apiError.status === 422) {
        this.showErrors([apiError]);
      } else {
        // network failure or server trouble: the draft stays in storage
        this.showErrors([
          { field: null, message: "submission failed; your draft is kept locally" },
        ]);
      }
    }
  }
}
