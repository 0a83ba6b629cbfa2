import { ApiClient } from "./api.js";
import { ExplorerApp } from "./app.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app container");

const app = new ExplorerApp(new ApiClient(""), root);
void app.start().catch((err: unknown) => {
  root.textContent = `Could not reach the service: ${String(err)}`;
});
