import { ApiClient, ApiError } from "./api.js";
import { buildResultCards, type ResultCard } from "./results.js";
import { canSubmit, keypointsInBox, normalizeBox, type Box } from "./selection.js";
import { RequestSequencer } from "./sequence.js";
import type { Keypoint } from "./types.js";
import { Viewport, wordColor } from "./view.js";

const CANVAS_W = 640;
const CANVAS_H = 480;
const CARD_W = 220;
const CARD_H = 165;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

class App {
  private api = new ApiClient("");
  private sequencer = new RequestSequencer();
  private keypoints: Keypoint[] = [];
  private viewport: Viewport | null = null;
  private currentImage: string | null = null;
  private box: Box | null = null;
  private dragStart: [number, number] | null = null;

  private imageList = el<HTMLUListElement>("image-list");
  private canvas = el<HTMLCanvasElement>("scatter");
  private status = el<HTMLSpanElement>("status");
  private countLabel = el<HTMLSpanElement>("kp-count");
  private kSelect = el<HTMLSelectElement>("k-select");
  private submitBtn = el<HTMLButtonElement>("submit");
  private resultsPane = el<HTMLDivElement>("results");
  private errorPane = el<HTMLDivElement>("error");

  async start(): Promise<void> {
    this.canvas.width = CANVAS_W;
    this.canvas.height = CANVAS_H;
    for (let k = 1; k <= 10; k++) {
      const opt = document.createElement("option");
      opt.value = String(k);
      opt.textContent = `top ${k}`;
      if (k === 5) opt.selected = true;
      this.kSelect.appendChild(opt);
    }
    this.canvas.addEventListener("mousedown", (e) => this.onDown(e));
    this.canvas.addEventListener("mousemove", (e) => this.onMove(e));
    window.addEventListener("mouseup", (e) => this.onUp(e));
    this.submitBtn.addEventListener("click", () => void this.submit());
    try {
      const images = await this.api.listImages();
      for (const img of images) {
        const li = document.createElement("li");
        li.textContent = `${img.image_id} (${img.keypoint_count})`;
        li.addEventListener("click", () => void this.loadImage(img.image_id));
        this.imageList.appendChild(li);
      }
      if (images.length) await this.loadImage(images[0].image_id);
    } catch (err) {
      this.showError(err);
    }
  }

  async loadImage(imageId: string): Promise<void> {
    try {
      this.keypoints = await this.api.getKeypoints(imageId);
      this.currentImage = imageId;
      this.viewport = new Viewport(this.keypoints, CANVAS_W, CANVAS_H);
      this.box = null;
      this.status.textContent = `${imageId}: ${this.keypoints.length} keypoints`;
      this.clearError();
      this.refreshSelection();
      this.draw();
    } catch (err) {
      this.showError(err);
    }
  }

  private canvasPos(e: MouseEvent): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    return [e.clientX - rect.left, e.clientY - rect.top];
  }

  private onDown(e: MouseEvent): void {
    this.dragStart = this.canvasPos(e);
    this.box = null;
    this.refreshSelection();
    this.draw();
  }

  private onMove(e: MouseEvent): void {
    if (!this.dragStart || !this.viewport) return;
    const [cx, cy] = this.canvasPos(e);
    const [x1, y1] = this.viewport.toImage(this.dragStart[0], this.dragStart[1]);
    const [x2, y2] = this.viewport.toImage(cx, cy);
    this.box = normalizeBox(x1, y1, x2, y2);
    this.refreshSelection();
    this.draw();
  }

  private onUp(e: MouseEvent): void {
    if (this.dragStart) this.onMove(e);
    this.dragStart = null;
    if (this.box && !canSubmit(this.box, this.keypoints)) {
      this.status.textContent = "selection rejected: box is degenerate or holds < 2 keypoints";
    }
  }

  private refreshSelection(): void {
    const inside = this.box ? keypointsInBox(this.keypoints, this.box).length : 0;
    this.countLabel.textContent = this.box ? `${inside} keypoints selected` : "no selection";
    this.submitBtn.disabled = !canSubmit(this.box, this.keypoints);
  }

  private draw(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx || !this.viewport) return;
    ctx.clearRect(0, 0, CANVAS_W, CANVAS_H);
    drawScatter(ctx, this.keypoints, this.viewport);
    if (this.box) {
      const [ax, ay] = this.viewport.toCanvas(this.box.xMin, this.box.yMin);
      const [bx, by] = this.viewport.toCanvas(this.box.xMax, this.box.yMax);
      ctx.strokeStyle = "#d33";
      ctx.lineWidth = 1.5;
      ctx.strokeRect(ax, ay, bx - ax, by - ay);
    }
  }

  private async submit(): Promise<void> {
    if (!this.box || !canSubmit(this.box, this.keypoints)) return;
    const token = this.sequencer.next();
    const selected = keypointsInBox(this.keypoints, this.box);
    const k = Number(this.kSelect.value);
    this.clearError();
    this.status.textContent = "searching...";
    try {
      const response = await this.api.query(selected, k);
      if (!this.sequencer.isCurrent(token)) return; // superseded by a newer submit
      this.renderCards(buildResultCards(response));
      this.status.textContent = `${response.results.length} results for ${this.currentImage}`;
    } catch (err) {
      if (!this.sequencer.isCurrent(token)) return;
      this.showError(err);
    }
  }

  private renderCards(cards: ResultCard[]): void {
    this.resultsPane.replaceChildren();
    for (const card of cards) {
      const div = document.createElement("div");
      div.className = "card";
      const title = document.createElement("div");
      title.className = "card-title";
      title.textContent = `#${card.rank} ${card.imageId}`;
      const score = document.createElement("div");
      score.className = "card-score";
      score.textContent = card.scoreText;
      const canvas = document.createElement("canvas");
      canvas.width = CARD_W;
      canvas.height = CARD_H;
      div.append(title, score, canvas);
      div.addEventListener("click", () => void this.loadImage(card.imageId));
      this.resultsPane.appendChild(div);
      void this.drawCard(canvas, card);
    }
  }

  private async drawCard(canvas: HTMLCanvasElement, card: ResultCard): Promise<void> {
    try {
      const kps = await this.api.getKeypoints(card.imageId);
      const ctx = canvas.getContext("2d");
      if (!ctx) return;
      const vp = new Viewport(kps, CARD_W, CARD_H, 8);
      drawScatter(ctx, kps, vp, 1.5);
      const [mx, my] = vp.toCanvas(card.matchCenter[0], card.matchCenter[1]);
      ctx.strokeStyle = "#d33";
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.arc(mx, my, 8, 0, 2 * Math.PI);
      ctx.stroke();
    } catch (err) {
      this.showError(err);
    }
  }

  private showError(err: unknown): void {
    const message =
      err instanceof ApiError
        ? `service error ${err.status}: ${err.message}`
        : `request failed: ${String(err)} (is the service reachable? retry after checking)`;
    this.errorPane.textContent = message;
    this.errorPane.style.display = "block";
  }

  private clearError(): void {
    this.errorPane.textContent = "";
    this.errorPane.style.display = "none";
  }
}

function drawScatter(
  ctx: CanvasRenderingContext2D,
  keypoints: Keypoint[],
  vp: Viewport,
  radius = 2.5,
): void {
  for (const [x, y, word] of keypoints) {
    const [cx, cy] = vp.toCanvas(x, y);
    ctx.fillStyle = wordColor(word);
    ctx.beginPath();
    ctx.arc(cx, cy, radius, 0, 2 * Math.PI);
    ctx.fill();
  }
}

void new App().start();
