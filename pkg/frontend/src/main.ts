/** Viewer entry point: mounts UI, drives the session/render loop. */

import { ApiClient } from "./client.js";
import { DatasetMeta } from "./protocol.js";
import { OrbitCamera, frameBox, vlen, vsub, Vec3 } from "./camera.js";
import { SplatRenderer } from "./render.js";
import { StreamSession } from "./session.js";
import { blockKey } from "./cache.js";
import { advanceTime, clampTime, intervalForTime } from "./timeline.js";
import { parseIdList, unpackFlags, SelectionParseError } from "./selection.js";
import { applyViewHash, decodeViewHash, encodeViewHash, viewHashOf } from "./urlhash.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (el === null) {
    throw new Error(`missing element #${id}`);
  }
  return el as T;
}

interface Ui {
  canvas: HTMLCanvasElement;
  hud: HTMLDivElement;
  timeline: HTMLInputElement;
  playButton: HTMLButtonElement;
  rate: HTMLInputElement;
  tau: HTMLInputElement;
  budget: HTMLInputElement;
  ids: HTMLTextAreaElement;
  idsError: HTMLDivElement;
  applyIds: HTMLButtonElement;
  wireframes: HTMLInputElement;
  hudToggle: HTMLInputElement;
}

class Viewer {
  private camera: OrbitCamera;
  private t: number;
  private playRate = 0;
  private playing = false;
  private selectionToken: string | null = null;
  private flagged = new Set<string>();
  private frames = 0;
  private fps = 0;
  private lastFpsMs = performance.now();
  private lastFrameMs = performance.now();

  constructor(
    private readonly ui: Ui,
    private readonly client: ApiClient,
    private readonly meta: DatasetMeta,
    private readonly session: StreamSession,
    private readonly renderer: SplatRenderer,
  ) {
    this.camera = frameBox(meta.root_box.min as Vec3, meta.root_box.max as Vec3);
    this.t = meta.snapshot_times[0];
    const fromHash = decodeViewHash(location.hash);
    if (fromHash !== null) {
      applyViewHash(this.camera, fromHash);
      this.t = clampTime(meta.snapshot_times, fromHash.t);
    }
    this.bindInput();
  }

  private bindInput(): void {
    const { canvas, timeline, playButton, rate, tau, budget, applyIds, ids } = this.ui;
    let dragging: "orbit" | "pan" | null = null;
    canvas.addEventListener("contextmenu", (e) => e.preventDefault());
    canvas.addEventListener("pointerdown", (e) => {
      dragging = e.button === 2 || e.shiftKey ? "pan" : "orbit";
      canvas.setPointerCapture(e.pointerId);
    });
    canvas.addEventListener("pointerup", () => {
      dragging = null;
      this.syncHash();
    });
    canvas.addEventListener("pointermove", (e) => {
      if (dragging === "orbit") {
        this.camera.orbit(-e.movementX * 0.005, -e.movementY * 0.005);
      } else if (dragging === "pan") {
        this.camera.pan(e.movementX, e.movementY);
      }
    });
    canvas.addEventListener("wheel", (e) => {
      e.preventDefault();
      this.camera.dolly(-Math.sign(e.deltaY));
      this.syncHash();
    });

    const times = this.meta.snapshot_times;
    timeline.min = String(times[0]);
    timeline.max = String(times[times.length - 1]);
    timeline.step = "any";
    timeline.value = String(this.t);
    timeline.addEventListener("input", () => {
      this.t = clampTime(times, Number(timeline.value));
      this.syncHash();
    });
    playButton.addEventListener("click", () => {
      this.playing = !this.playing;
      playButton.textContent = this.playing ? "pause" : "play";
    });
    rate.addEventListener("input", () => {
      this.playRate = Number(rate.value);
    });
    this.playRate = Number(rate.value);

    tau.value = String(this.session.tau);
    budget.value = String(this.session.budget);
    tau.addEventListener("input", () => {
      const v = Number(tau.value);
      if (v > 0) {
        this.session.tau = v;
        this.forceRefresh();
      }
    });
    budget.addEventListener("input", () => {
      const v = Number(budget.value);
      if (v > 0) {
        this.session.budget = Math.round(v);
        this.forceRefresh();
      }
    });
    applyIds.addEventListener("click", () => void this.uploadSelection(ids.value));
  }

  private forceRefresh(): void {
    this.session.invalidate();
  }

  private async uploadSelection(text: string): Promise<void> {
    const { idsError } = this.ui;
    let ids: number[];
    try {
      ids = parseIdList(text);
    } catch (err) {
      if (err instanceof SelectionParseError) {
        idsError.textContent = err.message;
        return;
      }
      throw err;
    }
    idsError.textContent = "";
    this.flagged.clear();
    if (ids.length === 0) {
      this.selectionToken = null;
      return;
    }
    try {
      this.selectionToken = await this.client.registerSelection(ids);
    } catch (err) {
      idsError.textContent = String(err);
    }
  }

  private async fetchFlags(interval: number, paths: number[]): Promise<void> {
    if (this.selectionToken === null) {
      return;
    }
    for (const path of paths) {
      const key = blockKey(interval, path);
      if (this.flagged.has(key) || !this.renderer.has(key)) {
        continue;
      }
      this.flagged.add(key);
      try {
        const mask = await this.client.selectionFlags(this.selectionToken, interval, path);
        const block = this.session.cache.get(key);
        if (block !== undefined) {
          this.renderer.setFlags(key, unpackFlags(mask, block.count));
        }
      } catch {
        this.flagged.delete(key);
      }
    }
  }

  private syncHash(): void {
    history.replaceState(null, "", encodeViewHash(viewHashOf(this.camera, this.t)));
  }

  private hudText(blockCount: number, pointCount: number): string {
    const cachedMib = (this.session.cache.sizeBytes / (1024 * 1024)).toFixed(1);
    const lines = [
      `${this.fps.toFixed(0)} fps`,
      `${pointCount.toLocaleString()} points in ${blockCount} blocks`,
      `${cachedMib} MiB cached, ${this.session.pendingFetches} fetches pending`,
      `t = ${this.t.toFixed(3)}`,
    ];
    if (this.session.cut?.budgetExceeded) {
      lines.push("budget exceeded: showing root only");
    }
    if (this.session.lastError !== null) {
      lines.push(`warning: ${this.session.lastError}`);
    }
    return lines.join("\n");
  }

  async frame(): Promise<void> {
    const now = performance.now();
    const dt = (now - this.lastFrameMs) / 1000;
    this.lastFrameMs = now;
    const times = this.meta.snapshot_times;
    if (this.playing && this.playRate !== 0) {
      this.t = advanceTime(times, this.t, this.playRate, dt);
      this.ui.timeline.value = String(this.t);
      if (this.t === times[times.length - 1]) {
        this.playing = false;
        this.ui.playButton.textContent = "play";
      }
    }

    this.camera.width = this.ui.canvas.clientWidth;
    this.camera.height = this.ui.canvas.clientHeight;
    const { s, alpha } = intervalForTime(times, this.t);
    const cameraJson = this.camera.toJson();
    await this.session.update(now, cameraJson, s);

    const resident = this.session.renderSet();
    let points = 0;
    const keys: string[] = [];
    for (const block of resident) {
      const key = blockKey(block.interval, block.path);
      this.renderer.ensureBlock(key, block);
      keys.push(key);
      points += block.count;
    }
    this.renderer.draw(cameraJson, keys, alpha, this.ui.wireframes.checked);
    void this.fetchFlags(s, resident.map((b) => b.path));

    this.frames++;
    if (now - this.lastFpsMs > 500) {
      this.fps = (1000 * this.frames) / (now - this.lastFpsMs);
      this.frames = 0;
      this.lastFpsMs = now;
    }
    this.ui.hud.style.display = this.ui.hudToggle.checked ? "block" : "none";
    this.ui.hud.textContent = this.hudText(keys.length, points);
  }

  run(): void {
    const loop = () => {
      void this.frame().finally(() => requestAnimationFrame(loop));
    };
    requestAnimationFrame(loop);
  }
}

async function start(): Promise<void> {
  const ui: Ui = {
    canvas: byId("view"),
    hud: byId("hud"),
    timeline: byId("timeline"),
    playButton: byId("play"),
    rate: byId("rate"),
    tau: byId("tau"),
    budget: byId("budget"),
    ids: byId("ids"),
    idsError: byId("ids-error"),
    applyIds: byId("apply-ids"),
    wireframes: byId("wireframes"),
    hudToggle: byId("hud-toggle"),
  };
  const client = new ApiClient();
  const meta = await client.meta();
  const diag = vlen(vsub(meta.root_box.max as Vec3, meta.root_box.min as Vec3));
  const session = new StreamSession(client, diag);
  const renderer = new SplatRenderer(ui.canvas);
  new Viewer(ui, client, meta, session, renderer).run();
}

start().catch((err) => {
  document.body.innerHTML = `<pre class="fatal">${String(err)}</pre>`;
});
