import { ReviewApi } from "./api.js";
import { ReviewApp } from "./app.js";

const root = document.getElementById("app");
if (root) {
  const api = new ReviewApi((input, init) => window.fetch(input, init));
  void new ReviewApp(root, api, window.localStorage).start();
}
