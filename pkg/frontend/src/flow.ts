import type { ApiClient } from "./api.js";
import type { Cell, StimulusView } from "./types.js";
import { isDone } from "./types.js";

export type FlowPhase = "loading" | "viewing" | "submitting" | "complete";

export interface FlowSnapshot {
  phase: FlowPhase;
  view: StimulusView | null;
  selected: Cell | null;
  error: string | null;
}

/**
 * Session state machine, kept free of DOM concerns so it can be tested in
 * isolation. Guarantees: a submit in flight blocks further submits (double
 * clicks collapse to one response), a failed submit preserves the selection
 * and never advances, and completion is a terminal state.
 */
export class SessionFlow {
  private phase: FlowPhase = "loading";
  private view: StimulusView | null = null;
  private selected: Cell | null = null;
  private error: string | null = null;

  constructor(
    private api: ApiClient,
    private sessionId: string,
    private onChange: (snap: FlowSnapshot) => void = () => {},
  ) {}

  snapshot(): FlowSnapshot {
    return { phase: this.phase, view: this.view, selected: this.selected, error: this.error };
  }

  private emit(): void {
    this.onChange(this.snapshot());
  }

  async loadNext(): Promise<void> {
    this.phase = "loading";
    this.selected = null;
    this.error = null;
    this.emit();
    const payload = await this.api.next(this.sessionId);
    if (isDone(payload)) {
      this.phase = "complete";
      this.view = null;
    } else {
      this.phase = "viewing";
      this.view = payload;
    }
    this.emit();
  }

  select(cell: Cell): void {
    if (this.phase !== "viewing") return;
    this.selected = cell;
    this.error = null;
    this.emit();
  }

  /** Returns true when a response was accepted and the flow advanced. */
  async submitSelected(latencyMs: number): Promise<boolean> {
    if (this.phase !== "viewing" || !this.view || !this.selected) return false;
    const view = this.view;
    const cell = this.selected;
    this.phase = "submitting";
    this.emit();
    try {
      await this.api.submit(this.sessionId, view.stimulus_id, cell, latencyMs);
    } catch (err) {
      // keep the selection for retry; cursor on the server is unchanged
      this.phase = "viewing";
      this.error = err instanceof Error ? err.message : String(err);
      this.emit();
      return false;
    }
    await this.loadNext();
    return true;
  }
}
