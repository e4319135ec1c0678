/* tslint:disable */
/* eslint-disable */

/**
 * Radial offsets around the bump after registration, sorted by angle from
 * the bump centre.
 */
export class BumpRegistration {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    angles: Float64Array;
    registered: Float64Array;
    /**
     * Mean residual as a percentage of the bump amplitude.
     */
    residual_percent: number;
    solves: number;
    target: Float64Array;
    /**
     * Largest difference between any two per-vertex transforms.
     */
    transform_spread: number;
}

/**
 * Greyscale depth render. `rgba` is row-major with row 0 at the top;
 * nearer surface is brighter and empty pixels are black.
 */
export class DepthFrame {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    covered: number;
    far: number;
    height: number;
    near: number;
    rgba: Uint8Array;
    width: number;
}

export class ErrorCurve {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    armse: Float64Array;
    /**
     * Crop radii in interocular units.
     */
    radii: Float64Array;
}

export function depthFrame(azimuth_deg: number, noise: number, seed: number, size: number): DepthFrame;

export function errorCurve(shape: number, bump: number, seed: number, steps: number): ErrorCurve;

export function registerBump(amplitude: number, lambda_scale: number): BumpRegistration;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_bumpregistration_free: (a: number, b: number) => void;
    readonly __wbg_depthframe_free: (a: number, b: number) => void;
    readonly __wbg_errorcurve_free: (a: number, b: number) => void;
    readonly __wbg_get_bumpregistration_angles: (a: number) => [number, number];
    readonly __wbg_get_bumpregistration_registered: (a: number) => [number, number];
    readonly __wbg_get_bumpregistration_residual_percent: (a: number) => number;
    readonly __wbg_get_bumpregistration_solves: (a: number) => number;
    readonly __wbg_get_bumpregistration_target: (a: number) => [number, number];
    readonly __wbg_get_bumpregistration_transform_spread: (a: number) => number;
    readonly __wbg_get_depthframe_covered: (a: number) => number;
    readonly __wbg_get_depthframe_far: (a: number) => number;
    readonly __wbg_get_depthframe_height: (a: number) => number;
    readonly __wbg_get_depthframe_near: (a: number) => number;
    readonly __wbg_get_depthframe_rgba: (a: number) => [number, number];
    readonly __wbg_get_depthframe_width: (a: number) => number;
    readonly __wbg_get_errorcurve_armse: (a: number) => [number, number];
    readonly __wbg_get_errorcurve_radii: (a: number) => [number, number];
    readonly __wbg_set_bumpregistration_angles: (a: number, b: number, c: number) => void;
    readonly __wbg_set_bumpregistration_registered: (a: number, b: number, c: number) => void;
    readonly __wbg_set_bumpregistration_residual_percent: (a: number, b: number) => void;
    readonly __wbg_set_bumpregistration_solves: (a: number, b: number) => void;
    readonly __wbg_set_bumpregistration_target: (a: number, b: number, c: number) => void;
    readonly __wbg_set_bumpregistration_transform_spread: (a: number, b: number) => void;
    readonly __wbg_set_depthframe_covered: (a: number, b: number) => void;
    readonly __wbg_set_depthframe_far: (a: number, b: number) => void;
    readonly __wbg_set_depthframe_height: (a: number, b: number) => void;
    readonly __wbg_set_depthframe_near: (a: number, b: number) => void;
    readonly __wbg_set_depthframe_rgba: (a: number, b: number, c: number) => void;
    readonly __wbg_set_depthframe_width: (a: number, b: number) => void;
    readonly __wbg_set_errorcurve_armse: (a: number, b: number, c: number) => void;
    readonly __wbg_set_errorcurve_radii: (a: number, b: number, c: number) => void;
    readonly depthFrame: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly errorCurve: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly registerBump: (a: number, b: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
