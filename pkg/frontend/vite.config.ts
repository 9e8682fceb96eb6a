import { defineConfig } from "vitest/config";

export default defineConfig({
  server: {
    port: 5173,
    proxy: {
      // The calibration service; start it with: phtab serve --port 8750
      "/api": "http://127.0.0.1:8750",
    },
  },
  test: {
    environment: "jsdom",
    testTimeout: 20000,
  },
});
