// Reproducible per-annotator task ordering: tasks are shuffled within each
// stage with a PRNG seeded from the annotator id, so reloading the console
// never reorders anyone's queue but different annotators see different
// orders (reduces order effects across the panel).

function hashString(s: string): number {
  let h = 2166136261;
  for (let i = 0; i < s.length; i++) {
    h ^= s.charCodeAt(i);
    h = Math.imul(h, 16777619);
  }
  return h >>> 0;
}

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export interface Staged {
  stage: number;
}

export function orderTasks<T extends Staged>(tasks: T[], annotator: string): T[] {
  const rand = mulberry32(hashString(annotator));
  const stages = new Map<number, T[]>();
  for (const task of tasks) {
    const bucket = stages.get(task.stage) ?? [];
    bucket.push(task);
    stages.set(task.stage, bucket);
  }
  const out: T[] = [];
  for (const stage of [...stages.keys()].sort((a, b) => a - b)) {
    const bucket = [...(stages.get(stage) as T[])];
    for (let i = bucket.length - 1; i > 0; i--) {
      const j = Math.floor(rand() * (i + 1));
      [bucket[i], bucket[j]] = [bucket[j] as T, bucket[i] as T];
    }
    out.push(...bucket);
  }
  return out;
}
