/** Options page: configure the local service base URL. */

import { DEFAULT_BASE_URL } from "./api";

async function main(): Promise<void> {
  const input = document.getElementById("base-url") as HTMLInputElement;
  const status = document.getElementById("status")!;
  const stored = await chrome.storage.sync.get({ baseUrl: DEFAULT_BASE_URL });
  input.value = stored.baseUrl as string;

  document.getElementById("save")!.addEventListener("click", async () => {
    const value = input.value.trim() || DEFAULT_BASE_URL;
    if (!/^https?:\/\/(localhost|127\.0\.0\.1)(:\d+)?$/.test(value)) {
      status.textContent = "base URL must point at localhost";
      return;
    }
    await chrome.storage.sync.set({ baseUrl: value });
    status.textContent = "saved";
  });
}

void main();
