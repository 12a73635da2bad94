/** Typed client for the session service. Carries no game logic: every
 * number shown in the UI originates in one of these response bodies. */

export interface Cursor {
  game: number;
  round: number;
}

export interface PublicState {
  session_id: string;
  variant: string;
  n_arms: number;
  arm_labels: number[];
  games: number;
  rounds_per_game: number;
  complete: boolean;
  total_reward: number;
  n_choices: number;
  history: { game: number; round: number; choice: number; reward: number }[];
  cursor?: Cursor;
}

export interface ChoiceResponse {
  session_id: string;
  game: number;
  round: number;
  arm: number;
  reward: number;
  total_reward: number;
  complete: boolean;
  next: Cursor | null;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: unknown,
  ) {
    super(`service returned ${status}`);
  }
}

async function parseOrThrow<T>(res: Response): Promise<T> {
  if (res.ok) return (await res.json()) as T;
  let detail: unknown = null;
  try {
    detail = (await res.json()).detail;
  } catch {
    /* non-JSON error body */
  }
  throw new ApiError(res.status, detail);
}

export class SessionApi {
  /** In-flight idempotency key per "game:round", so a retry of the same
   * cursor reuses the key and the service deduplicates. */
  private pendingKeys = new Map<string, string>();

  constructor(private baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async health(): Promise<boolean> {
    try {
      const res = await fetch(this.url("/healthz"));
      return res.ok;
    } catch {
      return false;
    }
  }

  async createSession(
    variant: string,
    opts: { seed?: number; group_id?: number } = {},
  ): Promise<PublicState> {
    const res = await fetch(this.url("/sessions"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ variant, ...opts }),
    });
    return parseOrThrow<PublicState>(res);
  }

  async getState(sessionId: string): Promise<PublicState> {
    const res = await fetch(this.url(`/sessions/${sessionId}`));
    return parseOrThrow<PublicState>(res);
  }

  async choose(
    sessionId: string,
    cursor: Cursor,
    arm: number,
  ): Promise<ChoiceResponse> {
    const slot = `${cursor.game}:${cursor.round}`;
    let key = this.pendingKeys.get(slot);
    if (!key) {
      key = crypto.randomUUID();
      this.pendingKeys.set(slot, key);
    }
    const res = await fetch(this.url(`/sessions/${sessionId}/choices`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        game: cursor.game,
        round: cursor.round,
        arm,
        idempotency_key: key,
      }),
    });
    const body = await parseOrThrow<ChoiceResponse>(res);
    this.pendingKeys.delete(slot);
    return body;
  }

  /** The export endpoint streams the finished dataset; the UI links to it
   * directly rather than buffering it in memory. */
  exportUrl(sessionId: string): string {
    return this.url(`/sessions/${sessionId}/export`);
  }
}
