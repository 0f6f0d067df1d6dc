import { App } from "./app.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("api") ?? window.location.origin;
const root = document.getElementById("app");
if (root) {
  const app = new App(baseUrl, root);
  void app.init();
}
