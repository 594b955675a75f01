import { Client } from './api';
import { App } from './app';

// The only configuration is where the search service lives; an empty base
// goes through the vite dev proxy.
const base = import.meta.env.VITE_API_BASE ?? '';

new App(new Client(base));
