import { defineConfig } from "vitest/config";

export default defineConfig({
  // relative asset paths so the bundle works under `whatif serve --ui dist`
  base: "./",
  build: {
    outDir: "dist",
  },
  server: {
    // during development, proxy API calls to a locally running `whatif serve`
    proxy: {
      "/api": "http://127.0.0.1:8321",
    },
  },
  test: {
    environment: "jsdom",
    include: ["tests/**/*.test.ts"],
  },
});
