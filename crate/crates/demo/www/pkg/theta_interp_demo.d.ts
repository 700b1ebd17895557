/* tslint:disable */
/* eslint-disable */

/**
 * `[x, a_n(x), â_n(x)]` per grid point, flattened.
 */
export function basis_curve(n: number, x_min: number, x_max: number, steps: number): Float64Array;

/**
 * `[a_n(x), â_n(x), error estimate]` at one point.
 */
export function basis_point(n: number, x: number): Float64Array;

/**
 * `[x, contour, closed form, |difference|]` for d₀⁺, flattened.
 */
export function d0_comparison(x_min: number, x_max: number, steps: number): Float64Array;

/**
 * Reduces `τ` into the theta-group domain and reports `J` and `θ` on both sides.
 */
export function reduce_point(re: number, im: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly basis_curve: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly basis_point: (a: number, b: number) => [number, number, number, number];
    readonly d0_comparison: (a: number, b: number, c: number) => [number, number, number, number];
    readonly reduce_point: (a: number, b: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
