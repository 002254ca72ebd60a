/// <reference types="vitest/config" />
import { defineConfig } from 'vite'

export default defineConfig({
  server: {
    proxy: {
      // dev server talks to a locally running `qcfuse serve`
      '/api': 'http://127.0.0.1:8642',
    },
  },
  build: {
    outDir: 'dist',
  },
  test: {
    environment: 'happy-dom',
  },
})
