import { createApp } from "./app.js";

const root = document.getElementById("app");
if (root !== null) {
  const service = new URLSearchParams(window.location.search).get("service");
  createApp(root, service === null ? {} : { baseUrl: service });
}
