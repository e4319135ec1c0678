/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_bumpregistration_free: (a: number, b: number) => void;
export const __wbg_depthframe_free: (a: number, b: number) => void;
export const __wbg_errorcurve_free: (a: number, b: number) => void;
export const __wbg_get_bumpregistration_angles: (a: number) => [number, number];
export const __wbg_get_bumpregistration_registered: (a: number) => [number, number];
export const __wbg_get_bumpregistration_residual_percent: (a: number) => number;
export const __wbg_get_bumpregistration_solves: (a: number) => number;
export const __wbg_get_bumpregistration_target: (a: number) => [number, number];
export const __wbg_get_bumpregistration_transform_spread: (a: number) => number;
export const __wbg_get_depthframe_covered: (a: number) => number;
export const __wbg_get_depthframe_far: (a: number) => number;
export const __wbg_get_depthframe_height: (a: number) => number;
export const __wbg_get_depthframe_near: (a: number) => number;
export const __wbg_get_depthframe_rgba: (a: number) => [number, number];
export const __wbg_get_depthframe_width: (a: number) => number;
export const __wbg_get_errorcurve_armse: (a: number) => [number, number];
export const __wbg_get_errorcurve_radii: (a: number) => [number, number];
export const __wbg_set_bumpregistration_angles: (a: number, b: number, c: number) => void;
export const __wbg_set_bumpregistration_registered: (a: number, b: number, c: number) => void;
export const __wbg_set_bumpregistration_residual_percent: (a: number, b: number) => void;
export const __wbg_set_bumpregistration_solves: (a: number, b: number) => void;
export const __wbg_set_bumpregistration_target: (a: number, b: number, c: number) => void;
export const __wbg_set_bumpregistration_transform_spread: (a: number, b: number) => void;
export const __wbg_set_depthframe_covered: (a: number, b: number) => void;
export const __wbg_set_depthframe_far: (a: number, b: number) => void;
export const __wbg_set_depthframe_height: (a: number, b: number) => void;
export const __wbg_set_depthframe_near: (a: number, b: number) => void;
export const __wbg_set_depthframe_rgba: (a: number, b: number, c: number) => void;
export const __wbg_set_depthframe_width: (a: number, b: number) => void;
export const __wbg_set_errorcurve_armse: (a: number, b: number, c: number) => void;
export const __wbg_set_errorcurve_radii: (a: number, b: number, c: number) => void;
export const depthFrame: (a: number, b: number, c: number, d: number) => [number, number, number];
export const errorCurve: (a: number, b: number, c: number, d: number) => [number, number, number];
export const registerBump: (a: number, b: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_start: () => void;
