/** Typed client for the segmentation session HTTP API. */

export interface Stroke {
  label: number;
  points: [number, number][];
  radius: number;
}

export interface JobStatus {
  job_id: string;
  state: "queued" | "running" | "done" | "failed";
  progress: number;
  message: string;
}

export interface SessionInfo {
  session_id: string;
  t: number;
  n_frames: number;
  done: boolean;
  paused: boolean;
  mode: string;
  gamma: number;
  refined: number[];
  accepted: number[];
  busy: boolean;
}

export interface ReportFrame {
  t: number;
  iou: number | null;
  f1: number | null;
  markers: number;
  seconds: number;
}

export interface Report {
  sequence: string;
  mode: string;
  config: Record<string, unknown>;
  frames: ReportFrame[];
  mean_iou: number | null;
  mean_f1: number | null;
  frames_corrected_fraction: number;
}

export interface CreateSessionRequest {
  frames_dir: string;
  init_mask: string;
  config?: Record<string, unknown>;
  gt_dir?: string;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function raiseForStatus(res: Response): Promise<void> {
  if (res.ok) return;
  let detail = res.statusText;
  try {
    const body = await res.json();
    if (body && typeof body.detail === "string") detail = body.detail;
  } catch {
    /* non-JSON error body */
  }
  throw new ApiError(res.status, detail);
}

export class Client {
  constructor(readonly base: string = "") {}

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await fetch(this.base + path, init);
    await raiseForStatus(res);
    return (await res.json()) as T;
  }

  private post<T>(path: string, body?: unknown): Promise<T> {
    return this.json<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
  }

  createSession(
    body: CreateSessionRequest,
  ): Promise<{ session_id: string; n_frames: number; t: number }> {
    return this.post("/sessions", body);
  }

  info(sid: string): Promise<SessionInfo> {
    return this.json(`/sessions/${sid}`);
  }

  step(sid: string): Promise<JobStatus> {
    return this.post(`/sessions/${sid}/step`);
  }

  job(jobId: string): Promise<JobStatus> {
    return this.json(`/jobs/${jobId}`);
  }

  /** Poll a job until it settles; rejects when the job fails. */
  async pollJob(
    jobId: string,
    intervalMs = 150,
    onProgress?: (j: JobStatus) => void,
  ): Promise<JobStatus> {
    for (;;) {
      const j = await this.job(jobId);
      onProgress?.(j);
      if (j.state === "done") return j;
      if (j.state === "failed") throw new ApiError(500, j.message);
      await new Promise((r) => setTimeout(r, intervalMs));
    }
  }

  /** Submit stroke geometry; resolves to the re-refined mask PNG. */
  async submitScribbles(
    sid: string,
    t: number,
    strokes: Stroke[],
    elapsedS: number,
  ): Promise<Blob> {
    const res = await fetch(`${this.base}/sessions/${sid}/scribbles`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ t, strokes, elapsed_s: elapsedS }),
    });
    await raiseForStatus(res);
    return res.blob();
  }

  accept(sid: string): Promise<{ t: number | null; done: boolean }> {
    return this.post(`/sessions/${sid}/accept`);
  }

  updateConfig(
    sid: string,
    patch: Record<string, unknown>,
  ): Promise<Record<string, unknown>> {
    return this.post(`/sessions/${sid}/config`, patch);
  }

  report(sid: string): Promise<Report> {
    return this.json(`/sessions/${sid}/report`);
  }

  frameUrl(sid: string, t: number): string {
    return `${this.base}/sessions/${sid}/frames/${t}.png`;
  }

  maskUrl(
    sid: string,
    t: number,
    kind: "refined" | "predicted" | "accepted" = "refined",
  ): string {
    return `${this.base}/sessions/${sid}/masks/${t}.png?kind=${kind}`;
  }

  modelUrl(sid: string, t: number): string {
    return `${this.base}/sessions/${sid}/model/${t}.png`;
  }

  /** Fetch an image and verify it decodes as a PNG body. */
  async fetchPng(url: string): Promise<Blob> {
    const res = await fetch(url);
    await raiseForStatus(res);
    const blob = await res.blob();
    const head = new Uint8Array(await blob.slice(0, 8).arrayBuffer());
    const magic = [137, 80, 78, 71, 13, 10, 26, 10];
    if (!magic.every((b, i) => head[i] === b)) {
      throw new ApiError(502, `not a PNG body at ${url}`);
    }
    return blob;
  }
}
