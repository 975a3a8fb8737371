/** Page wiring: create a session, then drive step / scribble / accept. */

import { ApiError, Client, Report, Stroke } from "./api.js";
import { OverlayView, StrokeCapture } from "./draw.js";
import { UiSession } from "./session.js";

const client = new Client("");

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function loadImage(url: string): Promise<HTMLImageElement> {
  return new Promise((resolve, reject) => {
    const img = new Image();
    img.onload = () => resolve(img);
    img.onerror = () => reject(new Error(`failed to load ${url}`));
    img.src = url + (url.includes("?") ? "&" : "?") + "ts=" + Date.now();
  });
}

class Page {
  session: UiSession | null = null;
  view = new OverlayView(el<HTMLCanvasElement>("canvas"));
  notice = el<HTMLDivElement>("notice");

  constructor() {
    el<HTMLButtonElement>("create").onclick = () => void this.create();
    el<HTMLButtonElement>("step").onclick = () => void this.step();
    el<HTMLButtonElement>("accept").onclick = () => void this.accept();
    el<HTMLInputElement>("opacity").oninput = (e) => {
      this.view.opacity = Number((e.target as HTMLInputElement).value) / 100;
      this.view.render();
    };
    el<HTMLInputElement>("show-model").onchange = (e) => {
      this.view.showModel = (e.target as HTMLInputElement).checked;
      this.view.render();
    };
    el<HTMLSelectElement>("mode").onchange = (e) => {
      const mode = (e.target as HTMLSelectElement).value;
      void this.session?.setMode(mode).catch((err) => this.warn(err));
    };
    el<HTMLInputElement>("gamma").oninput = (e) => {
      const g = Number((e.target as HTMLInputElement).value) / 100;
      el<HTMLSpanElement>("gamma-value").textContent = g.toFixed(2);
      void this.session?.setGamma(g).catch((err) => this.warn(err));
    };
    el<HTMLInputElement>("brush-radius").oninput = (e) => {
      this.view.liveRadius = Number((e.target as HTMLInputElement).value);
    };
    for (const id of ["brush-fg", "brush-bg"]) {
      el<HTMLInputElement>(id).onchange = () => {
        const label = el<HTMLInputElement>("brush-fg").checked ? 1 : 0;
        this.view.canvas.dataset.label = String(label);
        if (this.session) this.session.brush.label = label;
      };
    }
    new StrokeCapture(
      this.view,
      (stroke) => void this.submit(stroke),
      () => this.session?.canEdit(this.session.t) ?? false,
    );
  }

  warn(err: unknown): void {
    const msg =
      err instanceof ApiError ? `${err.status}: ${err.message}` : String(err);
    this.notice.textContent = msg;
    this.notice.classList.add("visible");
    setTimeout(() => this.notice.classList.remove("visible"), 4000);
  }

  setBusy(busy: boolean): void {
    for (const id of ["step", "accept"]) {
      el<HTMLButtonElement>(id).disabled = busy || !this.session || this.session.done;
    }
    el<HTMLDivElement>("progress-wrap").style.visibility = busy
      ? "visible"
      : "hidden";
  }

  async create(): Promise<void> {
    try {
      const config: Record<string, unknown> = {
        mode: el<HTMLSelectElement>("mode").value,
        gamma: Number(el<HTMLInputElement>("gamma").value) / 100,
      };
      const windowLen = el<HTMLInputElement>("window").value;
      if (windowLen) config.window = Number(windowLen);
      const gt = el<HTMLInputElement>("gt-dir").value;
      this.session = await UiSession.create(client, {
        frames_dir: el<HTMLInputElement>("frames-dir").value,
        init_mask: el<HTMLInputElement>("init-mask").value,
        config,
        ...(gt ? { gt_dir: gt } : {}),
      });
      el<HTMLDivElement>("setup").classList.add("hidden");
      el<HTMLDivElement>("workspace").classList.remove("hidden");
      await this.showFrame();
      this.renderTimeline();
      this.setBusy(false);
      this.status(`frame ${this.session.t}: press Step`);
    } catch (err) {
      this.warn(err);
    }
  }

  status(text: string): void {
    el<HTMLSpanElement>("status").textContent = text;
  }

  async showFrame(): Promise<void> {
    const s = this.session;
    if (!s) return;
    const frame = await loadImage(client.frameUrl(s.sid, s.t));
    this.view.setFrame(frame);
  }

  async showMask(blobUrl?: string): Promise<void> {
    const s = this.session;
    if (!s) return;
    const url = blobUrl ?? client.maskUrl(s.sid, s.t, "refined");
    const mask = await loadImage(url);
    this.view.setMask(mask);
    try {
      this.view.setModel(await loadImage(client.modelUrl(s.sid, s.t)));
    } catch {
      this.view.setModel(null); // plain-prediction mode has no model
    }
  }

  async step(): Promise<void> {
    const s = this.session;
    if (!s) return;
    this.setBusy(true);
    const bar = el<HTMLDivElement>("progress");
    try {
      await s.step((j) => {
        bar.style.width = `${Math.round(j.progress * 100)}%`;
      });
      await this.showFrame();
      await this.showMask();
      s.markRefinedShown();
      this.renderTimeline();
      this.renderCounters();
      this.status(
        s.paused
          ? `frame ${s.t}: object not found; scribble to recover, or Accept`
          : `frame ${s.t}: correct or Accept`,
      );
    } catch (err) {
      this.warn(err);
    } finally {
      this.setBusy(false);
    }
  }

  async submit(stroke: Stroke): Promise<void> {
    const s = this.session;
    if (!s) return;
    try {
      const blob = await s.submitStrokes([stroke], {
        width: this.view.width,
        height: this.view.height,
      });
      if (blob) {
        await this.showMask(URL.createObjectURL(blob));
        this.renderCounters();
      }
    } catch (err) {
      this.warn(err);
    }
  }

  async accept(): Promise<void> {
    const s = this.session;
    if (!s) return;
    try {
      await s.accept();
      this.renderTimeline();
      if (s.done) {
        this.status("done");
        await this.showReport();
      } else {
        await this.showFrame();
        this.view.setMask(null);
        this.view.setModel(null);
        this.status(`frame ${s.t}: press Step`);
      }
    } catch (err) {
      this.warn(err);
    }
  }

  renderTimeline(): void {
    const s = this.session;
    if (!s) return;
    const strip = el<HTMLDivElement>("timeline");
    strip.innerHTML = "";
    s.timeline.forEach((st, t) => {
      const chip = document.createElement("span");
      chip.className = `chip ${st}` + (t === s.t && !s.done ? " current" : "");
      chip.textContent = String(t);
      strip.appendChild(chip);
    });
  }

  renderCounters(): void {
    const s = this.session;
    if (!s) return;
    const totals = s.totals();
    el<HTMLSpanElement>("counter-frame").textContent = String(
      s.markers[s.t] ?? 0,
    );
    el<HTMLSpanElement>("counter-total").textContent = String(totals.markers);
    el<HTMLSpanElement>("counter-time").textContent = totals.seconds.toFixed(1);
  }

  async showReport(): Promise<void> {
    const s = this.session;
    if (!s) return;
    const { ok, report } = await s.verifyCounters();
    if (!ok) this.warn("local counters diverge from the server report");
    const div = el<HTMLDivElement>("report");
    div.classList.remove("hidden");
    div.innerHTML = this.reportTable(report);
  }

  reportTable(report: Report): string {
    const rows = report.frames
      .map(
        (f) =>
          `<tr><td>${f.t}</td><td>${f.iou?.toFixed(3) ?? "-"}</td>` +
          `<td>${f.f1?.toFixed(3) ?? "-"}</td><td>${f.markers}</td>` +
          `<td>${f.seconds.toFixed(1)}</td></tr>`,
      )
      .join("");
    const mean = report.mean_iou === null ? "-" : report.mean_iou.toFixed(3);
    return (
      `<h2>Session report</h2>` +
      `<p>mean IoU ${mean}, corrected fraction ` +
      `${report.frames_corrected_fraction.toFixed(3)}</p>` +
      `<table><tr><th>t</th><th>IoU</th><th>F1</th><th>markers</th>` +
      `<th>seconds</th></tr>${rows}</table>`
    );
  }
}

new Page();
