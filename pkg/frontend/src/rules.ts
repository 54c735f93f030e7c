// Annotation form rules: a client-side mirror of the server's validation.
// The server stays the source of truth; these rules exist so the form can
// enable and disable controls before submission, and they must never accept
// a state the server rejects (checked by the e2e sweep test).

export type Coherence = 3 | 2 | 1;
export type Issue = "none" | "intruded" | "chained" | "random";
export type Relatedness = 3 | 2 | 1 | 0;

export const COHERENCE_LABELS: Record<Coherence, string> = {
  3: "3 — Coherent",
  2: "2 — Average",
  1: "1 — Incoherent",
};

export const ISSUE_LABELS: Record<Issue, string> = {
  none: "N/A (no issue)",
  intruded: "Intruded",
  chained: "Chained",
  random: "Random",
};

export const RELATEDNESS_LABELS: Record<Relatedness, string> = {
  3: "3 — Strongly related",
  2: "2 — Partially related",
  1: "1 — Not related",
  0: "0 — Identical",
};

export interface FormState {
  coherence: Coherence | null;
  issue: Issue | null;
  implicatedPosts: number[];
  labels: string[];
  relatedness: Relatedness | null;
  isSubtopic: boolean;
}

export function emptyForm(isSubtopic: boolean): FormState {
  return {
    coherence: null,
    issue: null,
    implicatedPosts: [],
    labels: [],
    relatedness: null,
    isSubtopic,
  };
}

export interface Enablement {
  issueOptions: Issue[];
  issueLocked: boolean; // coherent: the issue column is typed N/A and locked
  labelSlots: 0 | 1 | 2;
  postsEnabled: boolean;
  postsRequired: boolean;
  relatednessVisible: boolean;
  relatednessForced: Relatedness | null; // incoherent subtopic: Not related
}

// What the form should offer given the coherence choice. Mirrors the
// guideline: coherent topics take N/A and exactly one label; average topics
// take intruded/chained and up to two labels; incoherent topics take no
// labels and may also be random; incoherent subtopics are forced to
// "Not related".
export function enablement(state: FormState): Enablement {
  const c = state.coherence;
  const base: Enablement = {
    issueOptions: [],
    issueLocked: false,
    labelSlots: 0,
    postsEnabled: false,
    postsRequired: false,
    relatednessVisible: state.isSubtopic,
    relatednessForced: null,
  };
  if (c === 3) {
    return { ...base, issueOptions: ["none"], issueLocked: true, labelSlots: 1 };
  }
  if (c === 2) {
    return {
      ...base,
      issueOptions: ["intruded", "chained"],
      labelSlots: 2,
      postsEnabled: true,
      postsRequired: true,
    };
  }
  if (c === 1) {
    return {
      ...base,
      issueOptions: ["intruded", "chained", "random"],
      postsEnabled: true,
      postsRequired: state.issue === "intruded" || state.issue === "chained",
      relatednessForced: state.isSubtopic ? 1 : null,
    };
  }
  return base;
}

// Coerce a form to the space the enablement allows: lock the issue to N/A
// for coherent topics, drop extra labels, force relatedness for incoherent
// subtopics, clear posts when no issue can be selected.
export function applyEnablement(state: FormState): FormState {
  const e = enablement(state);
  const next: FormState = { ...state, labels: state.labels.slice(0, e.labelSlots) };
  if (e.issueLocked) {
    next.issue = "none";
  } else if (next.issue !== null && !e.issueOptions.includes(next.issue)) {
    next.issue = null;
  }
  if (!e.postsEnabled || next.issue === "none") {
    next.implicatedPosts = [];
  }
  if (!e.relatednessVisible) {
    next.relatedness = null;
  } else if (e.relatednessForced !== null) {
    next.relatedness = e.relatednessForced;
  }
  return next;
}

export interface FieldError {
  field: string;
  message: string;
}

// Full rule check, same outcomes as the server. Label content only counts
// when non-blank.
export function validate(state: FormState, nPosts = 5): FieldError[] {
  const errors: FieldError[] = [];
  const labels = state.labels.map((l) => l.trim()).filter((l) => l.length > 0);
  const posts = state.implicatedPosts;

  if (state.coherence === null) {
    return [{ field: "coherence", message: "rate the topic's coherence first" }];
  }
  if (state.issue === null) {
    errors.push({ field: "issue", message: "select an issue type" });
    return errors;
  }
  if (new Set(posts).size !== posts.length) {
    errors.push({ field: "implicated_posts", message: "duplicate post numbers" });
  }
  if (posts.some((p) => p < 1 || p > nPosts)) {
    errors.push({
      field: "implicated_posts",
      message: `post numbers must lie in 1..${nPosts}`,
    });
  }

  if (state.coherence === 3) {
    if (state.issue !== "none") {
      errors.push({ field: "issue", message: "coherent topics take no issue (N/A)" });
    }
    if (labels.length !== 1) {
      errors.push({ field: "labels", message: "coherent topics take exactly one label" });
    }
  } else if (state.coherence === 2) {
    if (state.issue === "none") {
      errors.push({ field: "issue", message: "average topics need an issue" });
    } else if (state.issue === "random") {
      errors.push({ field: "issue", message: "random issue requires incoherent rating" });
    }
    if (labels.length < 1 || labels.length > 2) {
      errors.push({ field: "labels", message: "average topics take one or two labels" });
    }
  } else {
    if (labels.length > 0) {
      errors.push({ field: "labels", message: "incoherent topics take no labels" });
    }
    if (state.issue === "none") {
      errors.push({ field: "issue", message: "incoherent topics need an issue" });
    }
  }

  if ((state.issue === "intruded" || state.issue === "chained") && posts.length === 0) {
    errors.push({
      field: "implicated_posts",
      message: "mark the post numbers causing the issue",
    });
  }
  if (state.issue === "none" && posts.length > 0) {
    errors.push({
      field: "implicated_posts",
      message: "implicated posts are only recorded with an issue",
    });
  }

  if (state.isSubtopic) {
    if (state.relatedness === null) {
      errors.push({ field: "relatedness", message: "rate the relationship to the main topic" });
    } else if (state.coherence === 1 && state.relatedness !== 1) {
      errors.push({
        field: "relatedness",
        message: "incoherent subtopics must be rated Not related",
      });
    }
  } else if (state.relatedness !== null) {
    errors.push({ field: "relatedness", message: "relatedness applies only to subtopics" });
  }
  return errors;
}

export interface AnnotationPayload {
  topic: string;
  coherence: Coherence;
  issue: Issue;
  implicated_posts: number[];
  labels: string[];
  relatedness?: Relatedness;
}

export function toPayload(topicId: string, state: FormState): AnnotationPayload {
  const payload: AnnotationPayload = {
    topic: topicId,
    coherence: state.coherence as Coherence,
    issue: (state.issue ?? "none") as Issue,
    implicated_posts: [...state.implicatedPosts].sort((a, b) => a - b),
    labels: state.labels.map((l) => l.trim()).filter((l) => l.length > 0),
  };
  if (state.isSubtopic && state.relatedness !== null) {
    payload.relatedness = state.relatedness;
  }
  return payload;
}
