/** Headless session controller: all UI state transitions live here so the
 * browser layer stays a thin rendering shell and the logic is testable
 * against a real server without a DOM.
 */

import { Client, CreateSessionRequest, JobStatus, Report, Stroke } from "./api.js";

export type FrameStatus = "pending" | "refined" | "accepted";

export interface Brush {
  label: number;
  radius: number;
}

export class UiSession {
  readonly client: Client;
  readonly sid: string;
  readonly nFrames: number;

  t: number;
  timeline: FrameStatus[];
  /** Per-frame marker and correction-time counters, mirroring exactly what
   * was submitted to the server. */
  markers: number[];
  seconds: number[];
  mode: string;
  gamma: number;
  overlayOpacity = 0.5;
  brush: Brush = { label: 1, radius: 3 };
  showModel = false;
  busy = false;
  done = false;
  paused = false;

  /** Timestamp (ms) the current frame's refined mask first became visible,
   * or of the latest stroke submission; correction time accumulates in
   * deltas between these marks so local totals match the server log. */
  private timerMark: number | null = null;

  private constructor(client: Client, sid: string, nFrames: number, t: number, mode: string, gamma: number) {
    this.client = client;
    this.sid = sid;
    this.nFrames = nFrames;
    this.t = t;
    this.mode = mode;
    this.gamma = gamma;
    this.timeline = new Array<FrameStatus>(nFrames).fill("pending");
    this.timeline[0] = "accepted"; // the user-provided first mask
    this.markers = new Array(nFrames).fill(0);
    this.seconds = new Array(nFrames).fill(0);
  }

  static async create(client: Client, req: CreateSessionRequest): Promise<UiSession> {
    const created = await client.createSession(req);
    const info = await client.info(created.session_id);
    return new UiSession(client, info.session_id, info.n_frames, info.t, info.mode, info.gamma);
  }

  /** A mask is editable only on the current, refined, not-yet-accepted
   * frame. */
  canEdit(t: number): boolean {
    return !this.busy && !this.done && t === this.t && this.timeline[t] === "refined";
  }

  /** Run the server step for the current frame and poll it to completion. */
  async step(onProgress?: (j: JobStatus) => void): Promise<void> {
    if (this.busy || this.done) throw new Error("step unavailable");
    this.busy = true;
    try {
      const job = await this.client.step(this.sid);
      await this.client.pollJob(job.job_id, 120, onProgress);
      const info = await this.client.info(this.sid);
      this.paused = info.paused;
      this.timeline[this.t] = "refined";
    } finally {
      this.busy = false;
    }
  }

  /** Called when the refined mask is first painted; starts the frame's
   * correction timer. */
  markRefinedShown(now: number = Date.now()): void {
    this.timerMark = now;
  }

  clipStroke(points: [number, number][], width: number, height: number): [number, number][] {
    return points.filter(
      ([x, y]) => x >= 0 && y >= 0 && x < width && y < height,
    );
  }

  /** Submit strokes for the current frame; resolves to the refreshed mask
   * blob, or null for an empty submission (a no-op). */
  async submitStrokes(
    strokes: Stroke[],
    frameSize: { width: number; height: number },
    now: number = Date.now(),
  ): Promise<Blob | null> {
    if (!this.canEdit(this.t)) throw new Error("no editable mask displayed");
    const clipped = strokes
      .map((s) => ({ ...s, points: this.clipStroke(s.points, frameSize.width, frameSize.height) }))
      .filter((s) => s.points.length > 0);
    if (clipped.length === 0) return null;
    const mark = this.timerMark ?? now;
    const elapsed = Math.max(0, (now - mark) / 1000);
    const blob = await this.client.submitScribbles(this.sid, this.t, clipped, elapsed);
    this.markers[this.t] = (this.markers[this.t] ?? 0) + clipped.length;
    this.seconds[this.t] = (this.seconds[this.t] ?? 0) + elapsed;
    this.timerMark = now;
    return blob;
  }

  /** Freeze the current frame and advance; flips `done` on the last one. */
  async accept(): Promise<void> {
    if (this.busy) throw new Error("a job is in flight");
    const res = await this.client.accept(this.sid);
    this.timeline[this.t] = "accepted";
    this.timerMark = null;
    if (res.done || res.t === null) {
      this.done = true;
    } else {
      this.t = res.t;
    }
  }

  /** Mode / gamma changes apply from the next step onward. */
  async setMode(mode: string): Promise<void> {
    await this.client.updateConfig(this.sid, { mode });
    this.mode = mode;
  }

  async setGamma(gamma: number): Promise<void> {
    await this.client.updateConfig(this.sid, { gamma });
    this.gamma = gamma;
  }

  totals(): { markers: number; seconds: number } {
    return {
      markers: this.markers.reduce((a, b) => a + b, 0),
      seconds: this.seconds.reduce((a, b) => a + b, 0),
    };
  }

  /** Compare local counters against the server report; exact equality is
   * the contract. */
  async verifyCounters(): Promise<{ ok: boolean; report: Report }> {
    const report = await this.client.report(this.sid);
    const ok =
      report.frames.length === this.nFrames &&
      report.frames.every(
        (f, i) => f.markers === this.markers[i] && f.seconds === this.seconds[i],
      );
    return { ok, report };
  }
}
