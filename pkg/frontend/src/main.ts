/**
 * Browser entry point: wires ViewerSession to a canvas with a draggable
 * virtual light. Served as static files next to the CLI's output
 * directory; no backend required.
 */

import { DisplayMode, ViewerSession, loadSession } from "./viewer";

const SCALE = 8; // nearest-neighbour upscaling for small fixtures

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error("missing element #" + id);
  return el;
}

function drawFrame(session: ViewerSession, canvas: HTMLCanvasElement): void {
  const { width, height, pixels } = session.renderFrame();
  canvas.width = width * SCALE;
  canvas.height = height * SCALE;
  const ctx = canvas.getContext("2d")!;
  const img = ctx.createImageData(width, height);
  for (let p = 0; p < width * height; p++) {
    img.data[p * 4] = pixels[p * 3];
    img.data[p * 4 + 1] = pixels[p * 3 + 1];
    img.data[p * 4 + 2] = pixels[p * 3 + 2];
    img.data[p * 4 + 3] = 255;
  }
  const off = new OffscreenCanvas(width, height);
  off.getContext("2d")!.putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
}

function pointerToLight(
  ev: PointerEvent,
  canvas: HTMLCanvasElement,
): [number, number] {
  const rect = canvas.getBoundingClientRect();
  const lu = ((ev.clientX - rect.left) / rect.width) * 2 - 1;
  const lv = 1 - ((ev.clientY - rect.top) / rect.height) * 2;
  return [lu, lv];
}

async function boot(): Promise<void> {
  const canvas = $("view") as HTMLCanvasElement;
  const status = $("status");
  const normalsImg = $("normals") as HTMLImageElement;
  const heatmapImg = $("heatmap") as HTMLImageElement;
  let session: ViewerSession | null = null;

  const refresh = () => {
    if (!session) return;
    canvas.style.display = session.mode === "relit" ? "" : "none";
    normalsImg.style.display = session.mode === "normals" ? "" : "none";
    heatmapImg.style.display = session.mode === "heatmap" ? "" : "none";
    if (session.mode === "relit") drawFrame(session, canvas);
    status.textContent =
      `l = (${session.lu.toFixed(3)}, ${session.lv.toFixed(3)})` +
      (session.playlistIndex >= 0
        ? `  [${session.playlist[session.playlistIndex].name}]`
        : "");
  };

  const openBuffer = async (buf: ArrayBuffer) => {
    session = loadSession(buf);
    refresh();
  };

  const url = new URLSearchParams(location.search).get("ptm");
  if (url) {
    const resp = await fetch(url);
    if (!resp.ok) {
      status.textContent = `failed to load ${url}: ${resp.status}`;
    } else {
      await openBuffer(await resp.arrayBuffer());
      const lpUrl = new URLSearchParams(location.search).get("lp");
      if (lpUrl && session) {
        const lp = await fetch(lpUrl);
        if (lp.ok) (session as ViewerSession).loadPlaylist(await lp.text());
      }
      const nUrl = new URLSearchParams(location.search).get("normals");
      if (nUrl) normalsImg.src = nUrl;
      const hUrl = new URLSearchParams(location.search).get("heatmap");
      if (hUrl) heatmapImg.src = hUrl;
    }
  }

  ($("file") as HTMLInputElement).addEventListener("change", async (ev) => {
    const file = (ev.target as HTMLInputElement).files?.[0];
    if (file) {
      try {
        await openBuffer(await file.arrayBuffer());
      } catch (err) {
        status.textContent = String(err);
      }
    }
  });

  let dragging = false;
  canvas.addEventListener("pointerdown", (ev) => {
    dragging = true;
    canvas.setPointerCapture(ev.pointerId);
  });
  canvas.addEventListener("pointerup", () => (dragging = false));
  canvas.addEventListener("pointermove", (ev) => {
    if (!dragging || !session || session.mode !== "relit") return;
    session.setLight(...pointerToLight(ev, canvas));
    requestAnimationFrame(refresh);
  });

  for (const mode of ["relit", "normals", "heatmap"] as DisplayMode[]) {
    $(`mode-${mode}`).addEventListener("click", () => {
      if (!session) return;
      session.mode = mode;
      refresh();
    });
  }
  $("step").addEventListener("click", () => {
    if (session && session.playlist.length > 0) {
      session.stepPlaylist();
      refresh();
    }
  });
}

boot().catch((err) => {
  document.getElementById("status")!.textContent = String(err);
});
