import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    environment: 'node',
    include: ['tests/**/*.test.ts'],
    // the e2e file boots the real gateway, which needs a moment
    testTimeout: 60_000,
    hookTimeout: 60_000,
  },
});
