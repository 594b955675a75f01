import { defineConfig } from 'vite';

// Dev server proxies API calls to a locally running `shapefind serve`.
export default defineConfig({
  server: {
    proxy: {
      '/search': 'http://127.0.0.1:8080',
      '/models': 'http://127.0.0.1:8080',
      '/labels': 'http://127.0.0.1:8080',
      '/healthz': 'http://127.0.0.1:8080',
    },
  },
  build: {
    target: 'es2022',
  },
});
