import { defineConfig } from "vitest/config";

export default defineConfig({
  base: "./",
  build: {
    outDir: "dist",
    target: "es2022",
  },
  test: {
    environment: "happy-dom",
    include: ["tests/**/*.test.ts"],
    // the scripted full-session test runs against a real service process
    testTimeout: 120_000,
    hookTimeout: 60_000,
  },
});
