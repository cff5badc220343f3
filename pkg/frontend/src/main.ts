/** Browser entry point: mount the chat app onto #app. */

import { ApiClient } from "./api.js";
import { mountApp } from "./app.js";
import { API_BASE } from "./config.js";

const root = document.getElementById("app");
if (root) {
  mountApp(root, new ApiClient(API_BASE));
}
