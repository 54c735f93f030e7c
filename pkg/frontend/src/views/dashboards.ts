// Researcher dashboards. Every number rendered here (kappa, majorities,
// exclusions, histograms) comes straight from the API; the console never
// recomputes a decision.

import type {
  AgreementRow,
  AlignmentReport,
  Api,
  ApiError,
  FinalTopicsView,
  HistogramView,
  QueryTermSetView,
  SheetView,
} from "../api.js";

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

function section(title: string, ...children: (Node | string)[]): HTMLElement {
  return el("section", { class: "dashboard" }, el("h2", {}, title), ...children);
}

function message(text: string): HTMLElement {
  return el("p", { class: "empty" }, text);
}

async function guard<T>(panel: HTMLElement, load: () => Promise<T>): Promise<T | null> {
  try {
    return await load();
  } catch (error) {
    const apiError = error as ApiError;
    panel.append(message(apiError.message ?? "unavailable"));
    return null;
  }
}

function agreementTable(rows: AgreementRow[]): HTMLElement {
  const table = el(
    "table",
    { class: "agreement" },
    el(
      "tr",
      {},
      ...["Task", "All agree", "Two agree", "No agreement", "Total", "Fleiss kappa"].map((h) =>
        el("th", {}, h)
      )
    )
  );
  for (const row of rows) {
    table.append(
      el(
        "tr",
        {},
        el("td", {}, row.task),
        el("td", {}, String(row.all_agree)),
        el("td", {}, String(row.two_agree)),
        el("td", {}, String(row.no_agreement)),
        el("td", {}, String(row.total)),
        el("td", {}, row.kappa === null ? "undef." : row.kappa.toFixed(2))
      )
    );
  }
  return table;
}

export async function renderReviewDashboard(api: Api, panel: HTMLElement): Promise<void> {
  panel.replaceChildren();
  const agreementPanel = section("Agreement");
  panel.append(agreementPanel);
  const agreement = await guard(agreementPanel, () => api.agreement());
  if (agreement) {
    agreement.stages.forEach((rows, i) => {
      agreementPanel.append(el("h3", {}, `Stage ${i + 1}`), agreementTable(rows));
    });
    agreementPanel.append(el("h3", {}, "Pooled"), agreementTable(agreement.pooled));
    agreementPanel.append(
      el(
        "p",
        { class: "rate" },
        `Two-or-more agreement rate: ${(agreement.two_or_more_rate * 100).toFixed(1)}%`
      )
    );
  }

  const exclusionPanel = section("Adjudication and exclusions");
  panel.append(exclusionPanel);
  const final = await guard<FinalTopicsView>(exclusionPanel, () => api.adjudication());
  if (final) {
    const retained = final.retained.length;
    const excluded = final.excluded.length;
    exclusionPanel.append(
      el(
        "p",
        { class: "summary" },
        `${retained} retained, ${excluded} excluded of ${retained + excluded}`
      )
    );
    const list = el("ul", { class: "exclusions" });
    for (const topic of final.excluded) {
      list.append(
        el(
          "li",
          {},
          el("span", { class: "topic" }, topic.topic_id),
          el("span", { class: `badge badge-${topic.reason}` }, topic.reason)
        )
      );
    }
    exclusionPanel.append(list);
    const orphan = final.retained.filter((t) => t.orphan_risk);
    if (orphan.length > 0) {
      exclusionPanel.append(
        message(`orphan risk: ${orphan.map((t) => t.topic_id).join(", ")}`)
      );
    }
  }
}

export async function renderAlignmentDashboard(api: Api, panel: HTMLElement): Promise<void> {
  panel.replaceChildren();
  const container = section("Alignment matrix");
  panel.append(container);
  const view = await guard<{ matrix: unknown; report: AlignmentReport }>(container, () =>
    api.alignment()
  );
  if (!view) return;
  const report = view.report;
  container.append(
    el(
      "p",
      { class: "summary" },
      `${report.matched_codes}/${report.comparable_codes} codes matched; ` +
        `${report.gt_only.length} GT-only, ${report.lda_only.length} LDA-only; ` +
        `roster ${report.roster.length} topics`
    )
  );
  const table = el(
    "table",
    { class: "roster" },
    el("tr", {}, ...["Topic", "Label", "Kind", "Matched model topics"].map((h) => el("th", {}, h)))
  );
  for (const entry of report.roster) {
    table.append(
      el(
        "tr",
        {},
        el("td", {}, entry.id),
        el("td", {}, entry.label),
        el("td", {}, el("span", { class: `badge badge-${entry.kind}` }, entry.kind)),
        el("td", {}, entry.matched_topics.map(([m, t]) => `${m}#${t}`).join(", "))
      )
    );
  }
  container.append(table);
}

export async function renderCurationDashboard(api: Api, panel: HTMLElement): Promise<void> {
  panel.replaceChildren();
  const container = section("Query term curation");
  panel.append(container);
  const sets = await guard<{ topics: QueryTermSetView[] }>(container, () => api.querySets());
  if (!sets) return;
  const removals: [string, string][] = [];
  for (const topic of sets.topics) {
    const retained =
      topic.common.length +
      Object.values(topic.unique).reduce((n, terms) => n + terms.length, 0) +
      topic.proposed.length;
    const block = el(
      "article",
      { class: "curation-topic" },
      el("h3", {}, `${topic.topic_id} — ${topic.label}`),
      el("p", { class: "counter" }, `${retained} of 20 retained`)
    );
    const addTermRow = (origin: string, terms: string[]) => {
      if (terms.length === 0) return;
      const row = el("p", { class: "term-row" }, el("strong", {}, `${origin}: `));
      for (const term of terms) {
        const chip = el("button", { class: "chip", type: "button" }, term);
        chip.addEventListener("click", () => {
          removals.push([topic.topic_id, term]);
          chip.classList.add("removed");
          chip.disabled = true;
        });
        row.append(chip);
      }
      block.append(row);
    };
    addTermRow("common", topic.common);
    for (const [model, terms] of Object.entries(topic.unique)) {
      addTermRow(`unique:${model}`, terms);
    }
    addTermRow("proposed", topic.proposed);
    if (topic.removed.length > 0) {
      block.append(
        el(
          "p",
          { class: "removed-trail" },
          "removed: " + topic.removed.map((r) => `${r.term} [${r.origin}]`).join(", ")
        )
      );
    }
    container.append(block);
  }
  const apply = el("button", { type: "button" }, "Apply removals") as HTMLButtonElement;
  apply.addEventListener("click", async () => {
    const proposed: Record<string, string[]> = {};
    for (const topic of sets.topics) {
      if (topic.proposed.length > 0) {
        proposed[topic.topic_id] = topic.proposed.filter(
          (term) => !removals.some(([t, r]) => t === topic.topic_id && r === term)
        );
      }
    }
    await api.putQuerySets({ removals, proposed });
    await renderCurationDashboard(api, panel);
  });
  container.append(apply);
}

export async function renderSamplingDashboard(api: Api, panel: HTMLElement): Promise<void> {
  panel.replaceChildren();
  const container = section("Theoretical sampling");
  panel.append(container);
  const histogram = await guard<HistogramView>(container, () => api.histogram());
  if (!histogram) return;
  const chart = el("div", { class: "histogram" });
  const top = histogram.entries[0]?.fraction ?? 1;
  const picked = new Set<string>();
  for (const entry of histogram.entries) {
    const bar = el(
      "div",
      { class: "bar-row" },
      el("span", { class: "bar-label" }, entry.label),
      el("div", {
        class: "bar",
        style: `width:${Math.round((entry.fraction / top) * 100)}%`,
      }),
      el("span", { class: "bar-value" }, `${(entry.fraction * 100).toFixed(2)}%`)
    );
    bar.addEventListener("click", () => {
      if (picked.has(entry.label)) {
        picked.delete(entry.label);
        bar.classList.remove("picked");
      } else {
        picked.add(entry.label);
        bar.classList.add("picked");
      }
    });
    chart.append(bar);
  }
  container.append(chart);
  const sizeInput = el("input", { type: "number", value: "50", min: "1" }) as HTMLInputElement;
  const seedInput = el("input", { type: "number", value: "0" }) as HTMLInputElement;
  const drawButton = el("button", { type: "button" }, "Draw samples") as HTMLButtonElement;
  const results = el("div", { class: "draws" });
  drawButton.addEventListener("click", async () => {
    results.replaceChildren();
    for (const label of [...picked].sort()) {
      try {
        const draw = await api.draw(label, Number(sizeInput.value), Number(seedInput.value));
        results.append(
          el("p", {}, `${label}: drew ${draw.doc_ids.length} posts (${draw.doc_ids.slice(0, 5).join(", ")}…)`)
        );
      } catch (error) {
        results.append(message(`${label}: ${(error as ApiError).message}`));
      }
    }
  });
  container.append(
    el("p", { class: "draw-controls" }, "n: ", sizeInput, " seed: ", seedInput, " ", drawButton),
    results
  );
}

export async function renderCodingDashboard(api: Api, panel: HTMLElement): Promise<void> {
  panel.replaceChildren();
  const container = section("Coding sheets");
  panel.append(container);
  const sheets = await guard<{ sheets: SheetView[] }>(container, () => api.sheets());
  if (!sheets) return;
  if (sheets.sheets.length === 0) {
    container.append(message("no coding sheets exported yet"));
    return;
  }
  const groups = new Map<string, SheetView[]>();
  for (const sheet of sheets.sheets) {
    const bucket = groups.get(sheet.group) ?? [];
    bucket.push(sheet);
    groups.set(sheet.group, bucket);
  }
  for (const [group, members] of groups) {
    const label = members[0]?.group_label ?? group;
    const block = el("details", { class: "coding-group" }, el("summary", {}, `${group} — ${label}`));
    for (const sheet of members) {
      const body = el("div", { class: "sheet" }, el("h4", {}, `${sheet.topic_id} (${sheet.status})`));
      for (const [postId, text] of sheet.posts) {
        const memo = el("input", {
          type: "text",
          placeholder: "focused code",
        }) as HTMLInputElement;
        const save = el("button", { type: "button" }, "save") as HTMLButtonElement;
        save.addEventListener("click", async () => {
          await api.addCodingEntry(sheet.topic_id, {
            post_id: postId,
            focused_code: memo.value,
          });
          save.textContent = "saved";
        });
        body.append(el("p", { class: "sheet-post" }, el("strong", {}, postId + " "), text, memo, save));
      }
      if (sheet.entries.length > 0) {
        body.append(
          el(
            "p",
            { class: "entry-log" },
            `entries: ` +
              sheet.entries.map((e) => `${e.post_id}=${e.focused_code || "•"}`).join(", ")
          )
        );
      }
      block.append(body);
    }
    container.append(block);
  }
}
