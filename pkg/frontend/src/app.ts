import { ApiError, ChoiceResponse, PublicState, SessionApi } from "./api";
import { armColors } from "./colors";

/** Task card copy shown on the start screen, adapted from the original
 * study instructions each task replicates. */
export const TASKS: Record<string, { title: string; blurb: string }> = {
  stationary2: {
    title: "Two-armed slot machines",
    blurb:
      "You will play 20 independent games, each consisting of 10 rounds " +
      "with a distinct pair of slot machines. In each round, choose between " +
      "two colored buttons. Rewards are stochastic: you will win or lose " +
      "points based on your choice. Maximize your total number of points.",
  },
  restless4: {
    title: "Four-armed restless bandit",
    blurb:
      "You will complete 300 rounds with four colored squares, each " +
      "representing a different bandit. After each choice you receive " +
      "the number of points earned. Payouts drift over time, so keep " +
      "tracking them. Maximize your total number of points.",
  },
};

type Screen = "start" | "play" | "done";

export class App {
  screen: Screen = "start";
  state: PublicState | null = null;
  lastChoice: ChoiceResponse | null = null;
  errorMessage: string | null = null;
  /** The in-flight choice request, if any; tests await it to settle. */
  pending: Promise<void> | null = null;

  private busy = false;
  private selectedVariant = "stationary2";
  private keyHandler = (ev: KeyboardEvent) => this.onKey(ev);
  private focusHandler = () => void this.refresh();

  constructor(
    public root: HTMLElement,
    private api: SessionApi,
  ) {
    window.addEventListener("keydown", this.keyHandler);
    window.addEventListener("focus", this.focusHandler);
    this.render();
  }

  destroy(): void {
    window.removeEventListener("keydown", this.keyHandler);
    window.removeEventListener("focus", this.focusHandler);
    this.root.replaceChildren();
  }

  async start(variant: string): Promise<void> {
    this.selectedVariant = variant;
    this.errorMessage = null;
    this.render();
    try {
      this.state = await this.api.createSession(variant);
      this.lastChoice = null;
      this.screen = this.state.complete ? "done" : "play";
    } catch {
      this.errorMessage =
        "Could not reach the session service. Check the connection and retry.";
    }
    this.render();
  }

  /** Single entry point for both clicks and number keys. Returns without
   * sending anything while a request is in flight, so a double-click
   * produces exactly one POST. */
  chooseArm(label: number): void {
    const st = this.state;
    if (this.busy || this.screen !== "play" || !st || !st.cursor) return;
    if (!st.arm_labels.includes(label)) return;
    this.busy = true;
    this.render();
    this.pending = this.doChoose(st.session_id, st.cursor, label).finally(
      () => {
        this.busy = false;
        this.pending = null;
        this.render();
      },
    );
  }

  private async doChoose(
    sessionId: string,
    cursor: { game: number; round: number },
    label: number,
  ): Promise<void> {
    try {
      const res = await this.api.choose(sessionId, cursor, label);
      this.lastChoice = res;
      this.errorMessage = null;
      const st = this.state!;
      st.total_reward = res.total_reward;
      st.n_choices += 1;
      st.complete = res.complete;
      if (res.next) {
        st.cursor = res.next;
      } else {
        delete st.cursor;
      }
      if (res.complete) {
        // authoritative summary for the final screen
        this.state = await this.api.getState(sessionId);
        this.screen = "done";
      }
    } catch (err) {
      if (err instanceof ApiError && (err.status === 409 || err.status === 410)) {
        await this.refresh();
      } else {
        this.errorMessage =
          "The choice did not go through. Check the connection and try again.";
      }
    }
  }

  /** Re-sync with the service; the event log is the source of truth. */
  async refresh(): Promise<void> {
    const st = this.state;
    if (!st) return;
    try {
      this.state = await this.api.getState(st.session_id);
      this.screen = this.state.complete ? "done" : "play";
      this.errorMessage = null;
    } catch {
      this.errorMessage =
        "Could not reach the session service. Check the connection and retry.";
    }
    this.render();
  }

  private onKey(ev: KeyboardEvent): void {
    if (this.screen !== "play" || !/^\d$/.test(ev.key)) return;
    this.chooseArm(Number(ev.key));
  }

  // ---- rendering ----------------------------------------------------

  private render(): void {
    this.root.replaceChildren();
    if (this.screen === "start") this.renderStart();
    else if (this.screen === "play") this.renderPlay();
    else this.renderDone();
    if (this.errorMessage) this.renderBanner();
  }

  private el<K extends keyof HTMLElementTagNameMap>(
    tag: K,
    attrs: Record<string, string> = {},
    text?: string,
  ): HTMLElementTagNameMap[K] {
    const node = document.createElement(tag);
    for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
    if (text !== undefined) node.textContent = text;
    return node;
  }

  private renderBanner(): void {
    const banner = this.el("div", { class: "banner", "data-testid": "error-banner" });
    banner.append(this.el("span", {}, this.errorMessage ?? ""));
    const retry = this.el("button", { "data-testid": "retry" }, "Retry");
    retry.addEventListener("click", () => {
      if (this.screen === "start") void this.start(this.selectedVariant);
      else void this.refresh();
    });
    banner.append(retry);
    this.root.append(banner);
  }

  private renderStart(): void {
    const wrap = this.el("div", { class: "screen start" });
    wrap.append(this.el("h1", {}, "banditlab"));
    wrap.append(
      this.el("p", { class: "lede" }, "Pick a task. Play at your own pace."),
    );
    for (const [variant, task] of Object.entries(TASKS)) {
      const card = this.el("section", { class: "task-card" });
      card.append(this.el("h2", {}, task.title));
      card.append(this.el("p", {}, task.blurb));
      const btn = this.el(
        "button",
        { class: "start-btn", "data-testid": `start-${variant}` },
        "Start",
      );
      btn.addEventListener("click", () => void this.start(variant));
      card.append(btn);
      wrap.append(card);
    }
    this.root.append(wrap);
  }

  private progressText(st: PublicState): string {
    const cur = st.cursor;
    if (!cur) return "";
    return st.games > 1
      ? `Game ${cur.game} / Round ${cur.round}`
      : `Round ${cur.round} of ${st.rounds_per_game}`;
  }

  private renderPlay(): void {
    const st = this.state!;
    const wrap = this.el("div", { class: "screen play" });
    wrap.append(
      this.el("div", { class: "progress", "data-testid": "progress" },
        this.progressText(st)),
    );

    const arms = this.el("div", { class: "arms" });
    const colors = armColors(st.variant, st.n_arms);
    const shape = st.variant === "stationary2" ? "button" : "square";
    st.arm_labels.forEach((label, i) => {
      const btn = this.el("button", {
        class: `arm ${shape}`,
        "data-shape": shape,
        "data-arm": String(label),
        "aria-label": `machine ${label}`,
      });
      btn.style.backgroundColor = colors[i]!;
      btn.textContent = String(label);
      if (this.busy) btn.disabled = true;
      btn.addEventListener("click", () => this.chooseArm(label));
      arms.append(btn);
    });
    wrap.append(arms);
    wrap.append(
      this.el("p", { class: "hint" },
        `Click a ${shape}, or press its number key.`),
    );

    const fb = this.el("div", { class: "feedback" });
    const last = this.lastChoice;
    fb.append(
      this.el("div", { class: "last", "data-testid": "last-reward" },
        last ? formatPoints(last.reward, true) : "—"),
    );
    fb.append(
      this.el("div", { class: "total", "data-testid": "total" },
        `Total: ${formatPoints(st.total_reward)}`),
    );
    fb.append(
      this.el("div", { class: "count", "data-testid": "played" },
        `${st.n_choices} of ${st.games * st.rounds_per_game} rounds played`),
    );
    wrap.append(fb);
    this.root.append(wrap);
  }

  private renderDone(): void {
    const st = this.state!;
    const wrap = this.el("div", { class: "screen done" });
    wrap.append(this.el("h1", {}, "Session complete"));
    wrap.append(
      this.el("p", { class: "summary", "data-testid": "summary" },
        `You earned ${formatPoints(st.total_reward)} points over ` +
          `${st.n_choices} rounds.`),
    );
    const link = this.el("a", {
      class: "download",
      "data-testid": "download",
      href: this.api.exportUrl(st.session_id),
      download: `session-${st.session_id}.jsonl`,
    });
    link.textContent = "Download your results";
    wrap.append(link);
    const again = this.el("button", { "data-testid": "again" }, "Play again");
    again.addEventListener("click", () => {
      this.state = null;
      this.lastChoice = null;
      this.screen = "start";
      this.render();
    });
    wrap.append(again);
    this.root.append(wrap);
  }
}

export function formatPoints(x: number, signed = false): string {
  // rewards are service-provided numbers; render them verbatim, with an
  // explicit plus on per-round feedback
  return signed && x > 0 ? `+${x}` : String(x);
}

export function createApp(root: HTMLElement, api: SessionApi): App {
  return new App(root, api);
}
