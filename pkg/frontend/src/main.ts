import { fetchHealth } from "./api";
import { createChatApp } from "./app";
import { serviceBaseUrl } from "./config";

const root = document.getElementById("app");
if (root) {
  const baseUrl = serviceBaseUrl();
  createChatApp(root, { baseUrl });
  const status = document.getElementById("health");
  if (status) {
    void fetchHealth(baseUrl).then((health) => {
      status.textContent = health
        ? `متصل — ${health.index_chunks} بند نمایه‌شده`
        : "سرویس در دسترس نیست";
    });
  }
}
