import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    testTimeout: 120_000,
    hookTimeout: 60_000,
    // the peers and CLI runs spawn real subprocesses; keep files sequential
    fileParallelism: false,
  },
});
