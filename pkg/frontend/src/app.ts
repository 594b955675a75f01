import * as THREE from 'three';
import { STLLoader } from 'three/examples/jsm/loaders/STLLoader.js';
import { ApiError, Client, isAbort, ResultItem } from './api';
import { LabelFlow, LabelState } from './labels';
import { Palette } from './palette';
import { ResultsGrid, PAGE_SIZE } from './results';
import { GizmoMode, SketchScene } from './scene';
import { UiSketch } from './sketch';

type PointerMode = 'orbit' | 'draw';

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export class App {
  private readonly sketch = new UiSketch();
  private readonly palette: Palette;
  private readonly scene: SketchScene;
  private readonly grid: ResultsGrid;
  private readonly labels: LabelFlow;

  private mode: PointerMode = 'orbit';
  private pendingPts: THREE.Vector3[] = [];
  private drawing = false;
  private offset = 0;
  private lastSearch: (() => void) | null = null;

  private readonly termInput = el<HTMLInputElement>('term');
  private readonly statusBar = el<HTMLElement>('status');
  private readonly chipsBox = el<HTMLElement>('chips');
  private readonly paletteBox = el<HTMLElement>('palette');

  constructor(private readonly client: Client) {
    this.scene = new SketchScene(el<HTMLCanvasElement>('view'));
    this.palette = new Palette((oldest) =>
      window.confirm(`Palette is full. Remove ${oldest.artifactId}?`),
    );
    this.grid = new ResultsGrid(el('results'), client, {
      onLoad: (item) => void this.loadModel(item),
      onApplyScale: (item) => void this.applySuggestedScale(item),
      onPage: (offset) => {
        this.offset = offset;
        this.submit();
      },
    });
    this.labels = new LabelFlow(
      client,
      (term) => {
        this.termInput.value = term;
      },
      (state) => this.renderChips(state),
    );
    this.scene.onGizmoChange = () => this.renderPalette();

    this.wireToolbar();
    this.wirePointer();
    this.wireSearch();
    this.resize();
    window.addEventListener('resize', () => this.resize());
    this.animate();
  }

  private resize(): void {
    const canvas = this.scene.canvas;
    const box = canvas.parentElement!.getBoundingClientRect();
    this.scene.resize(box.width, box.height);
  }

  private animate(): void {
    this.scene.showPlane(this.sketch.plane);
    this.scene.render();
    requestAnimationFrame(() => this.animate());
  }

  private setMode(mode: PointerMode): void {
    this.mode = mode;
    this.scene.orbit.enabled = mode === 'orbit';
    el('mode-orbit').classList.toggle('active', mode === 'orbit');
    el('mode-draw').classList.toggle('active', mode === 'draw');
  }

  private wireToolbar(): void {
    el('mode-orbit').addEventListener('click', () => this.setMode('orbit'));
    el('mode-draw').addEventListener('click', () => this.setMode('draw'));
    el('undo').addEventListener('click', () => {
      this.sketch.undo();
      this.scene.rebuildStrokes(this.sketch);
    });
    el('clear').addEventListener('click', () => {
      this.sketch.clear();
      this.scene.rebuildStrokes(this.sketch);
    });
    const tilt = (axis: THREE.Vector3) => () => {
      this.sketch.plane.tilt(axis, Math.PI / 12);
    };
    el('tilt-x').addEventListener('click', tilt(new THREE.Vector3(1, 0, 0)));
    el('tilt-y').addEventListener('click', tilt(new THREE.Vector3(0, 1, 0)));
    el('plane-up').addEventListener('click', () => {
      this.sketch.plane.origin.add(this.sketch.plane.normal().multiplyScalar(10));
    });
    el('plane-down').addEventListener('click', () => {
      this.sketch.plane.origin.add(this.sketch.plane.normal().multiplyScalar(-10));
    });
    const radius = el<HTMLInputElement>('radius');
    radius.addEventListener('change', () => {
      const r = Number(radius.value);
      if (r > 0) this.sketch.strokeRadiusMm = r;
    });
    for (const mode of ['translate', 'rotate', 'scale'] as GizmoMode[]) {
      el(`gizmo-${mode}`).addEventListener('click', () => this.scene.setGizmoMode(mode));
    }
    el<HTMLInputElement>('photo').addEventListener('change', (ev) => {
      const input = ev.target as HTMLInputElement;
      const file = input.files?.[0];
      if (file) void this.labels.submit(file, file.name);
      input.value = '';
    });
  }

  private wirePointer(): void {
    const canvas = this.scene.canvas;
    canvas.addEventListener('pointerdown', (ev) => {
      if (this.mode !== 'draw' || ev.button !== 0) return;
      canvas.setPointerCapture(ev.pointerId);
      this.drawing = true;
      this.pendingPts = [];
      this.sketch.beginStroke();
      this.extendAt(ev);
    });
    canvas.addEventListener('pointermove', (ev) => {
      if (this.drawing) this.extendAt(ev);
    });
    const finish = (ev: PointerEvent) => {
      if (!this.drawing) return;
      this.drawing = false;
      canvas.releasePointerCapture(ev.pointerId);
      this.sketch.endStroke();
      this.pendingPts = [];
      this.scene.rebuildStrokes(this.sketch);
    };
    canvas.addEventListener('pointerup', finish);
    canvas.addEventListener('pointercancel', finish);
  }

  private extendAt(ev: PointerEvent): void {
    const hit = this.sketch.plane.intersect(this.scene.pointerRay(ev));
    if (!hit) return;
    this.sketch.extendStroke(hit);
    this.pendingPts.push(hit);
    this.scene.rebuildStrokes(this.sketch, this.pendingPts);
  }

  private wireSearch(): void {
    el('search').addEventListener('click', () => {
      this.offset = 0;
      this.submit();
    });
    this.termInput.addEventListener('keydown', (ev) => {
      if (ev.key === 'Enter') {
        this.offset = 0;
        this.submit();
      }
    });
  }

  private submit(): void {
    const term = this.termInput.value.trim();
    const bases = this.palette.toBases();
    const spatial = !this.sketch.isEmpty || bases.length > 0;
    if (!spatial && !term) {
      this.toast('Draw something or enter a term first.');
      return;
    }
    const run = spatial
      ? () => this.runSketchSearch(term)
      : () => this.runTextSearch(term);
    this.lastSearch = run;
    run();
  }

  private async runSketchSearch(term: string): Promise<void> {
    const wire = this.sketch.toWire(
      this.palette.toBases(),
      term || undefined,
      PAGE_SIZE,
      this.offset,
    );
    this.status('searching by sketch...');
    try {
      const res = await this.client.searchSketch(wire);
      this.grid.render(res.results, this.offset);
      const ext = res.sketch_extents_mm;
      this.status(
        ext
          ? `${res.results.length} results, sketch ${ext.map((v) => v.toFixed(0)).join(' x ')} mm`
          : `${res.results.length} results`,
      );
    } catch (err) {
      this.handleSearchError(err);
    }
  }

  private async runTextSearch(term: string): Promise<void> {
    this.status(`searching "${term}"...`);
    try {
      const res = await this.client.searchText(term, PAGE_SIZE, this.offset);
      this.grid.render(res.results, this.offset);
      this.status(`${res.results.length} results`);
    } catch (err) {
      this.handleSearchError(err);
    }
  }

  private handleSearchError(err: unknown): void {
    if (isAbort(err)) return; // a newer search took over
    if (err instanceof ApiError) {
      const retriable = err.status === 504 || err.status >= 500;
      this.toast(`${err.code}: ${err.message}`, retriable ? this.lastSearch : null);
    } else {
      this.toast(String(err), this.lastSearch);
    }
    this.status('');
  }

  private async loadModel(item: ResultItem): Promise<void> {
    if (this.palette.get(item.id)) {
      this.scene.select(this.palette.get(item.id)!);
      return;
    }
    const entry = this.palette.load(item.id);
    if (!entry) return; // eviction declined
    try {
      const res = await fetch(this.client.meshUrl(item.id));
      if (!res.ok) throw new Error(`mesh fetch failed (${res.status})`);
      const geometry = new STLLoader().parse(await res.arrayBuffer());
      this.scene.addModel(entry, geometry);
      this.scene.select(entry);
      this.renderPalette();
    } catch (err) {
      this.palette.remove(item.id);
      this.toast(String(err));
    }
  }

  private async applySuggestedScale(item: ResultItem): Promise<void> {
    if (item.suggested_scale === undefined) return;
    if (!this.palette.get(item.id)) await this.loadModel(item);
    const entry = this.palette.get(item.id);
    if (!entry) return;
    entry.uniformScale = item.suggested_scale;
    this.scene.refreshEntry(entry);
    this.renderPalette();
  }

  private renderPalette(): void {
    this.paletteBox.innerHTML = '';
    for (const entry of this.palette.entries) {
      const row = document.createElement('div');
      row.className = 'palette-row';
      const name = document.createElement('span');
      name.textContent = `${entry.artifactId} x${entry.uniformScale.toFixed(2)}`;
      name.addEventListener('click', () => this.scene.select(entry));
      const drop = document.createElement('button');
      drop.textContent = 'x';
      drop.addEventListener('click', () => {
        this.palette.remove(entry.artifactId);
        this.scene.removeModel(entry.artifactId);
        this.renderPalette();
      });
      row.append(name, drop);
      this.paletteBox.appendChild(row);
    }
  }

  private renderChips(state: LabelState): void {
    this.chipsBox.innerHTML = '';
    if (state.kind === 'loading') {
      this.chipsBox.textContent = 'reading photo...';
    } else if (state.kind === 'empty') {
      this.chipsBox.textContent = 'no suggestions';
    } else if (state.kind === 'error') {
      this.chipsBox.innerHTML = `<span class="chip-error">labels failed: ${state.message}</span>`;
    } else if (state.kind === 'done') {
      for (const term of state.chips) {
        const chip = document.createElement('button');
        chip.className = 'chip';
        chip.textContent = term;
        chip.addEventListener('click', () => this.labels.pick(term));
        this.chipsBox.appendChild(chip);
      }
    }
  }

  private status(text: string): void {
    this.statusBar.textContent = text;
  }

  private toast(message: string, retry: (() => void) | null = null): void {
    const box = el('toasts');
    const toast = document.createElement('div');
    toast.className = 'toast';
    const text = document.createElement('span');
    text.textContent = message;
    toast.appendChild(text);
    if (retry) {
      const btn = document.createElement('button');
      btn.textContent = 'retry';
      btn.addEventListener('click', () => {
        toast.remove();
        retry();
      });
      toast.appendChild(btn);
    }
    box.appendChild(toast);
    setTimeout(() => toast.remove(), 8000);
  }
}
