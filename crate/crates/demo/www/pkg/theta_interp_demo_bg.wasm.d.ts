/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const basis_curve: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const basis_point: (a: number, b: number) => [number, number, number, number];
export const d0_comparison: (a: number, b: number, c: number) => [number, number, number, number];
export const reduce_point: (a: number, b: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
