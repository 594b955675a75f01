import * as THREE from 'three';
import { OrbitControls } from 'three/examples/jsm/controls/OrbitControls.js';
import { TransformControls } from 'three/examples/jsm/controls/TransformControls.js';
import { DrawingPlane } from './plane';
import { PaletteEntry } from './palette';
import { UiSketch } from './sketch';

export type GizmoMode = 'translate' | 'rotate' | 'scale';

const STROKE_COLOR = 0x4cc2ff;
const PENDING_COLOR = 0xffd34c;
const MODEL_COLOR = 0x9aa3b2;

// All three.js state for the sketch view: orbit camera, the drawing plane
// visual, stroke polylines, loaded palette meshes, and one transform gizmo
// shared by whichever palette model is selected.
export class SketchScene {
  readonly scene = new THREE.Scene();
  readonly camera: THREE.PerspectiveCamera;
  readonly renderer: THREE.WebGLRenderer;
  readonly orbit: OrbitControls;
  readonly gizmo: TransformControls;

  private readonly strokeGroup = new THREE.Group();
  private readonly pendingLine: THREE.Line;
  private readonly modelMeshes = new Map<string, THREE.Mesh>();
  private readonly planeMesh: THREE.Mesh;
  private readonly raycaster = new THREE.Raycaster();
  private selected: PaletteEntry | null = null;
  onGizmoChange: () => void = () => {};

  constructor(readonly canvas: HTMLCanvasElement) {
    this.scene.background = new THREE.Color(0x14161a);
    this.camera = new THREE.PerspectiveCamera(50, 1, 0.1, 5000);
    this.camera.position.set(140, 110, 180);
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });

    this.orbit = new OrbitControls(this.camera, canvas);
    this.orbit.enableDamping = true;

    this.gizmo = new TransformControls(this.camera, canvas);
    this.gizmo.addEventListener('dragging-changed', (e) => {
      this.orbit.enabled = !e.value;
    });
    this.gizmo.addEventListener('objectChange', () => {
      this.syncSelected();
      this.onGizmoChange();
    });
    this.scene.add(this.gizmo.getHelper());

    this.scene.add(new THREE.HemisphereLight(0xdde4ee, 0x333a45, 1.1));
    const sun = new THREE.DirectionalLight(0xffffff, 1.4);
    sun.position.set(120, 220, 160);
    this.scene.add(sun);
    this.scene.add(new THREE.GridHelper(400, 20, 0x3a4150, 0x262b33));

    this.planeMesh = new THREE.Mesh(
      new THREE.PlaneGeometry(160, 160),
      new THREE.MeshBasicMaterial({
        color: 0x3d7dff,
        transparent: true,
        opacity: 0.09,
        side: THREE.DoubleSide,
        depthWrite: false,
      }),
    );
    this.planeMesh.matrixAutoUpdate = false;
    this.scene.add(this.planeMesh);

    this.scene.add(this.strokeGroup);
    this.pendingLine = new THREE.Line(
      new THREE.BufferGeometry(),
      new THREE.LineBasicMaterial({ color: PENDING_COLOR }),
    );
    this.scene.add(this.pendingLine);
  }

  resize(width: number, height: number): void {
    this.renderer.setSize(width, height, false);
    this.camera.aspect = width / Math.max(1, height);
    this.camera.updateProjectionMatrix();
  }

  render(): void {
    this.orbit.update();
    this.renderer.render(this.scene, this.camera);
  }

  /** Ray under a pointer event, in world space. */
  pointerRay(ev: PointerEvent): THREE.Ray {
    const rect = this.canvas.getBoundingClientRect();
    const ndc = new THREE.Vector2(
      ((ev.clientX - rect.left) / rect.width) * 2 - 1,
      -((ev.clientY - rect.top) / rect.height) * 2 + 1,
    );
    this.raycaster.setFromCamera(ndc, this.camera);
    return this.raycaster.ray.clone();
  }

  showPlane(plane: DrawingPlane): void {
    this.planeMesh.matrix.copy(plane.matrix());
  }

  rebuildStrokes(sketch: UiSketch, pending: THREE.Vector3[] = []): void {
    this.strokeGroup.clear();
    for (const stroke of sketch.strokes) {
      const geo = new THREE.BufferGeometry().setFromPoints(stroke);
      this.strokeGroup.add(
        new THREE.Line(geo, new THREE.LineBasicMaterial({ color: STROKE_COLOR })),
      );
    }
    this.pendingLine.geometry.dispose();
    this.pendingLine.geometry = new THREE.BufferGeometry().setFromPoints(pending);
  }

  addModel(entry: PaletteEntry, geometry: THREE.BufferGeometry): void {
    this.removeModel(entry.artifactId);
    geometry.computeVertexNormals();
    const mesh = new THREE.Mesh(
      geometry,
      new THREE.MeshStandardMaterial({
        color: MODEL_COLOR,
        metalness: 0.1,
        roughness: 0.75,
        transparent: true,
        opacity: 0.92,
      }),
    );
    mesh.name = entry.artifactId;
    this.applyEntry(mesh, entry);
    this.modelMeshes.set(entry.artifactId, mesh);
    this.scene.add(mesh);
  }

  removeModel(artifactId: string): void {
    const mesh = this.modelMeshes.get(artifactId);
    if (!mesh) return;
    if (this.gizmo.object === mesh) this.gizmo.detach();
    this.scene.remove(mesh);
    mesh.geometry.dispose();
    this.modelMeshes.delete(artifactId);
  }

  select(entry: PaletteEntry | null, mode: GizmoMode = 'translate'): void {
    this.selected = entry;
    const mesh = entry ? this.modelMeshes.get(entry.artifactId) : undefined;
    if (!mesh) {
      this.gizmo.detach();
      return;
    }
    this.gizmo.attach(mesh);
    this.gizmo.setMode(mode);
  }

  setGizmoMode(mode: GizmoMode): void {
    this.gizmo.setMode(mode);
  }

  /** Push an entry's stored transform onto its mesh (e.g. after apply-scale). */
  refreshEntry(entry: PaletteEntry): void {
    const mesh = this.modelMeshes.get(entry.artifactId);
    if (mesh) this.applyEntry(mesh, entry);
  }

  private applyEntry(mesh: THREE.Mesh, entry: PaletteEntry): void {
    mesh.position.copy(entry.position);
    mesh.quaternion.copy(entry.rotation);
    mesh.scale.setScalar(entry.uniformScale);
  }

  // Gizmo drags mutate the mesh; mirror that back into the palette entry,
  // forcing scale uniform since the wire format carries one factor.
  private syncSelected(): void {
    const entry = this.selected;
    const mesh = entry ? this.modelMeshes.get(entry.artifactId) : undefined;
    if (!entry || !mesh) return;
    entry.position.copy(mesh.position);
    entry.rotation.copy(mesh.quaternion);
    const s = mesh.scale;
    if (s.x !== s.y || s.y !== s.z) {
      const u = Math.max(1e-6, (Math.abs(s.x) + Math.abs(s.y) + Math.abs(s.z)) / 3);
      mesh.scale.setScalar(u);
    }
    entry.uniformScale = mesh.scale.x;
  }
}
