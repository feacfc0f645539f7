export interface Progress {
  done: number;
  total: number;
}

export interface StimulusView {
  session_id: string;
  stimulus_id: string;
  rows: number;
  cols: number;
  block_px: number;
  margin_px: number;
  image_url: string;
  practice: boolean;
  progress: Progress;
}

export type NextPayload = ({ done: true; session_id: string } & Partial<StimulusView>) | StimulusView;

export interface SessionInfo {
  session_id: string;
  total: number;
  practice_count: number;
}

export interface SubmitResult {
  ok: boolean;
  cursor: number;
  done: boolean;
}

export interface SessionStatus {
  session_id: string;
  annotator_id: string;
  cursor: number;
  total: number;
  completed: boolean;
}

export interface Cell {
  row: number;
  col: number;
}

export function isDone(p: NextPayload): p is { done: true; session_id: string } {
  return (p as { done?: boolean }).done === true;
}
