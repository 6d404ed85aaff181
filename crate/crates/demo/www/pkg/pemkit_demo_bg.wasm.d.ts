/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_heatmap_free: (a: number, b: number) => void;
export const __wbg_spectrum_free: (a: number, b: number) => void;
export const curriculum_trace: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const heatmap_bands: (a: number) => number;
export const heatmap_frames: (a: number) => number;
export const heatmap_offset: (a: number) => number;
export const heatmap_transcript: (a: number) => [number, number];
export const heatmap_values: (a: number) => [number, number];
export const mix_heatmap: (a: number, b: number, c: bigint, d: number) => [number, number, number];
export const noise_spectrum: (a: number, b: number, c: number, d: bigint) => [number, number, number];
export const spectrum_centers: (a: number) => [number, number];
export const spectrum_levels: (a: number) => [number, number];
export const spectrum_slope: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
