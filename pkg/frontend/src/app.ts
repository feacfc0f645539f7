import { ApiClient } from "./api.js";
import { SessionFlow, type FlowSnapshot } from "./flow.js";
import { cellFromPoint, cellRect, moveSelection, sameCell, type GridGeometry } from "./grid.js";
import type { Cell, StimulusView } from "./types.js";

const api = new ApiClient("");

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function geometryOf(view: StimulusView): GridGeometry {
  return { rows: view.rows, cols: view.cols, blockPx: view.block_px, marginPx: view.margin_px };
}

class AnnotateApp {
  private flow: SessionFlow | null = null;
  private imageShownAt = 0;
  private currentView: StimulusView | null = null;

  private readonly startPanel = el<HTMLDivElement>("start-panel");
  private readonly taskPanel = el<HTMLDivElement>("task-panel");
  private readonly donePanel = el<HTMLDivElement>("done-panel");
  private readonly progressLabel = el<HTMLSpanElement>("progress");
  private readonly practiceBadge = el<HTMLSpanElement>("practice-badge");
  private readonly stage = el<HTMLDivElement>("stage");
  private readonly image = el<HTMLImageElement>("stimulus");
  private readonly overlay = el<HTMLDivElement>("overlay");
  private readonly submitBtn = el<HTMLButtonElement>("submit");
  private readonly retryBanner = el<HTMLDivElement>("retry-banner");

  start(): void {
    el<HTMLFormElement>("start-form").addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.createSession();
    });
    this.submitBtn.addEventListener("click", () => void this.submit());
    this.overlay.addEventListener("click", (ev) => this.onOverlayClick(ev));
    this.overlay.addEventListener("mousemove", (ev) => this.onHover(ev));
    document.addEventListener("keydown", (ev) => this.onKey(ev));
    this.image.addEventListener("load", () => this.onImageLoaded());
  }

  private async createSession(): Promise<void> {
    const annotator = el<HTMLInputElement>("annotator").value.trim();
    const seed = parseInt(el<HTMLInputElement>("seed").value, 10) || 0;
    if (!annotator) return;
    const info = await api.createSession(annotator, seed);
    this.startPanel.hidden = true;
    this.taskPanel.hidden = false;
    this.flow = new SessionFlow(api, info.session_id, (snap) => this.render(snap));
    await this.flow.loadNext();
  }

  private render(snap: FlowSnapshot): void {
    this.retryBanner.hidden = snap.error === null;
    if (snap.error !== null) this.retryBanner.textContent = `Submission failed: ${snap.error}. Your selection is kept; press Submit to retry.`;

    if (snap.phase === "complete") {
      // terminal screen: deliberately no scores, no correctness feedback
      this.taskPanel.hidden = true;
      this.donePanel.hidden = false;
      return;
    }
    if (!snap.view) return;
    if (snap.view !== this.currentView) {
      this.currentView = snap.view;
      this.showView(snap.view);
    }
    this.progressLabel.textContent = `${snap.view.progress.done + 1} of ${snap.view.progress.total}`;
    this.practiceBadge.hidden = !snap.view.practice;
    this.submitBtn.disabled = snap.phase !== "viewing" || snap.selected === null;
    this.paintSelection(snap.selected);
  }

  private showView(view: StimulusView): void {
    this.overlay.replaceChildren();
    this.image.removeAttribute("width");
    this.image.src = api.imageUrl(view.image_url);
  }

  private onImageLoaded(): void {
    // fixed rendering: native pixel size, the stage scrolls but never scales
    this.image.width = this.image.naturalWidth;
    this.image.height = this.image.naturalHeight;
    this.buildLattice();
    this.imageShownAt = performance.now();
  }

  private buildLattice(): void {
    const view = this.currentView;
    if (!view) return;
    const geom = geometryOf(view);
    this.overlay.style.width = `${this.image.naturalWidth}px`;
    this.overlay.style.height = `${this.image.naturalHeight}px`;
    this.overlay.replaceChildren();
    for (let row = 1; row <= geom.rows; row++) {
      for (let col = 1; col <= geom.cols; col++) {
        const rect = cellRect({ row, col }, geom);
        const target = document.createElement("div");
        target.className = "cell-target";
        target.dataset.row = String(row);
        target.dataset.col = String(col);
        target.style.left = `${rect.left}px`;
        target.style.top = `${rect.top}px`;
        target.style.width = `${rect.width}px`;
        target.style.height = `${rect.height}px`;
        this.overlay.appendChild(target);
      }
    }
  }

  private pointToCell(ev: MouseEvent): Cell | null {
    const view = this.currentView;
    if (!view) return null;
    const bounds = this.overlay.getBoundingClientRect();
    return cellFromPoint(ev.clientX - bounds.left, ev.clientY - bounds.top, geometryOf(view));
  }

  private onOverlayClick(ev: MouseEvent): void {
    const cell = this.pointToCell(ev);
    if (cell && this.flow) this.flow.select(cell);
  }

  private onHover(ev: MouseEvent): void {
    const cell = this.pointToCell(ev);
    for (const node of this.overlay.children) {
      const t = node as HTMLDivElement;
      const isHover =
        !!cell && t.dataset.row === String(cell.row) && t.dataset.col === String(cell.col);
      t.classList.toggle("hover", isHover);
    }
  }

  private paintSelection(cell: Cell | null): void {
    for (const node of this.overlay.children) {
      const t = node as HTMLDivElement;
      const selected =
        !!cell && t.dataset.row === String(cell.row) && t.dataset.col === String(cell.col);
      t.classList.toggle("selected", selected);
    }
  }

  private onKey(ev: KeyboardEvent): void {
    const flow = this.flow;
    const view = this.currentView;
    if (!flow || !view || this.taskPanel.hidden) return;
    const geom = geometryOf(view);
    const selected = flow.snapshot().selected;
    const moves: Record<string, [number, number]> = {
      ArrowUp: [-1, 0],
      ArrowDown: [1, 0],
      ArrowLeft: [0, -1],
      ArrowRight: [0, 1],
    };
    if (ev.key in moves) {
      ev.preventDefault();
      const [dr, dc] = moves[ev.key];
      const next = moveSelection(selected, dr, dc, geom);
      if (!sameCell(next, selected)) flow.select(next);
      else flow.select(next); // re-emit to keep paint in sync
    } else if (ev.key === "Enter") {
      ev.preventDefault();
      void this.submit();
    }
  }

  private async submit(): Promise<void> {
    if (!this.flow) return;
    const latency = performance.now() - this.imageShownAt;
    await this.flow.submitSelected(Math.round(latency));
  }
}

new AnnotateApp().start();
