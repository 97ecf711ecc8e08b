import { initApp } from "./app.js";

declare global {
  interface Window {
    HONFLOW_BASE?: string;
    HONFLOW_TILE_URL?: string;
  }
}

const root = document.getElementById("app");
if (!root) throw new Error("missing #app element");

const app = initApp(root, {
  baseUrl: window.HONFLOW_BASE ?? "/api/v1",
  tileUrl: window.HONFLOW_TILE_URL ?? null,
});

app.start().catch((error) => {
  const banner = root.querySelector<HTMLElement>(".banner");
  if (banner) {
    banner.hidden = false;
    banner.textContent = `failed to load snapshot: ${error}`;
  }
});
