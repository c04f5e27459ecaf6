import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    // the e2e suite boots the real HTTP service, so allow generous timeouts
    testTimeout: 60000,
    hookTimeout: 60000,
  },
});
