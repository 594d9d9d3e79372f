/* tslint:disable */
/* eslint-disable */

/**
 * Local effectivity map of one step. Layout: `[θ, m(|D|), σ(D), number of elements]`,
 * then per element `[vertex count, x1, y1, .., D]` with `D = NaN` where the exact error
 * vanishes.
 */
export function effectivity_map(problem_name: string, element: string, n: number, variant: string, k: number): Float64Array;

/**
 * Stresses along the segment `(x0, y0) → (x1, y1)` on the square benchmark with `n × n`
 * elements. Each of the `samples + 1` points gives `[t, σ*xx, σ*yy, σ*xy, σxx, σyy, σxy,
 * σʰxx, σʰyy, σʰxy]` with exact and FE stresses after the recovered ones.
 */
export function transect(element: string, n: number, variant: string, k: number, x0: number, y0: number, x1: number, y1: number, samples: number): Float64Array;

/**
 * `[s, W(s), W̃(s)]` triples for `n + 1` points on `(0, 1]`; `W̃` is cut at 50.
 */
export function weight_curves(n: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly effectivity_map: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
    readonly transect: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number, k: number) => [number, number, number, number];
    readonly weight_curves: (a: number) => [number, number];
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
