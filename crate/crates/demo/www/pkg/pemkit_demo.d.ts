/* tslint:disable */
/* eslint-disable */

export class Heatmap {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly bands: number;
    readonly frames: number;
    readonly offset: number;
    readonly transcript: string;
    /**
     * Row-major `frames x bands` normalized log-mel values.
     */
    readonly values: Float64Array;
}

export class Spectrum {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly centers: Float64Array;
    /**
     * Band power in dB, relative to the lowest band.
     */
    readonly levels: Float64Array;
    readonly slope: number;
}

/**
 * Feed a dev-WER trace through the stage controller described by
 * `schedule` (TOML) and return one `epoch<TAB>stage<TAB>wer<TAB>decision<TAB>conditions` line per epoch.
 */
export function curriculum_trace(schedule: string, wers: Float64Array): string;

/**
 * Synthesize a tone utterance, mix it with pink noise at `condition`
 * ("clean" or a dB value) and return its normalized log-mel bands.
 */
export function mix_heatmap(condition: string, seed: bigint, sigma: number): Heatmap;

/**
 * Octave-band levels of generated noise, 63 Hz to 4 kHz.
 */
export function noise_spectrum(kind: string, seconds: number, seed: bigint): Spectrum;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_heatmap_free: (a: number, b: number) => void;
    readonly __wbg_spectrum_free: (a: number, b: number) => void;
    readonly curriculum_trace: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly heatmap_bands: (a: number) => number;
    readonly heatmap_frames: (a: number) => number;
    readonly heatmap_offset: (a: number) => number;
    readonly heatmap_transcript: (a: number) => [number, number];
    readonly heatmap_values: (a: number) => [number, number];
    readonly mix_heatmap: (a: number, b: number, c: bigint, d: number) => [number, number, number];
    readonly noise_spectrum: (a: number, b: number, c: number, d: bigint) => [number, number, number];
    readonly spectrum_centers: (a: number) => [number, number];
    readonly spectrum_levels: (a: number) => [number, number];
    readonly spectrum_slope: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
