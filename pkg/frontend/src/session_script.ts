/**
 * Headless scripted session: creates a session against a running service and
 * answers every item with a seeded pseudo-random valid cell. Exercises the
 * exact client code paths the browser uses (ApiClient + SessionFlow).
 *
 * Usage: node session_script.js <base_url> <annotator> <seed> [perType] [practice]
 */

import { ApiClient } from "./api.js";
import { SessionFlow } from "./flow.js";

function lcg(seed: number): () => number {
  let s = seed >>> 0;
  return () => {
    s = (1664525 * s + 1013904223) >>> 0;
    return s / 2 ** 32;
  };
}

async function main(): Promise<void> {
  const [base, annotator, seedArg, perTypeArg, practiceArg] = process.argv.slice(2);
  if (!base || !annotator) {
    console.error("usage: session_script <base_url> <annotator> <seed> [perType] [practice]");
    process.exit(2);
  }
  const seed = parseInt(seedArg ?? "0", 10);
  const api = new ApiClient(base);
  const opts: { perType?: number; practiceCount?: number } = {};
  if (perTypeArg !== undefined) opts.perType = parseInt(perTypeArg, 10);
  if (practiceArg !== undefined) opts.practiceCount = parseInt(practiceArg, 10);

  const info = await api.createSession(annotator, seed, opts);
  const rand = lcg(seed + 1);
  const flow = new SessionFlow(api, info.session_id);
  let answered = 0;
  let practiceSeen = 0;

  await flow.loadNext();
  while (flow.snapshot().phase !== "complete") {
    const view = flow.snapshot().view;
    if (!view) throw new Error("viewing phase without a stimulus");
    if (view.practice) practiceSeen += 1;
    // fetch the stimulus like a browser would and sanity-check the bytes
    const img = await fetch(api.imageUrl(view.image_url));
    if (!img.ok) throw new Error(`image fetch failed: ${img.status}`);
    const head = new Uint8Array((await img.arrayBuffer()).slice(0, 4));
    if (head[1] !== 0x50 || head[2] !== 0x4e || head[3] !== 0x47) {
      throw new Error("stimulus is not a png");
    }
    const row = 1 + Math.floor(rand() * view.rows);
    const col = 1 + Math.floor(rand() * view.cols);
    flow.select({ row, col });
    const ok = await flow.submitSelected(5);
    if (!ok) throw new Error(`submit rejected at item ${answered}`);
    answered += 1;
  }
  const status = await api.status(info.session_id);
  console.log(
    JSON.stringify({
      session_id: info.session_id,
      total: info.total,
      answered,
      practice_seen: practiceSeen,
      completed: status.completed,
    }),
  );
}

main().catch((err) => {
  console.error(String(err));
  process.exit(1);
});
