// Arrow keys map to centered joystick deflections of +-1500 counts
// (anything beyond the 50-count deadzone works; 1500 gives ~73% speed).

import { DriveIntent } from "./types.js";

export const KEY_DEFLECTION = 1500;
const CENTER = 2048;

export function keyToJoystick(key: string): DriveIntent | null {
    switch (key) {
        case "ArrowUp":
            return { joystick: { x_counts: CENTER, y_counts: CENTER + KEY_DEFLECTION } };
        case "ArrowDown":
            return { joystick: { x_counts: CENTER, y_counts: CENTER - KEY_DEFLECTION } };
        case "ArrowRight":
            return { joystick: { x_counts: CENTER + KEY_DEFLECTION, y_counts: CENTER } };
        case "ArrowLeft":
            return { joystick: { x_counts: CENTER - KEY_DEFLECTION, y_counts: CENTER } };
        case " ":
            return { joystick: { x_counts: CENTER, y_counts: CENTER, pressed: true } };
        default:
            return null;
    }
}

// Glove-tilt presets: 25 degree pitch/roll, comfortably past the 20 degree
// decoder threshold.
const TILT = 25 * (Math.PI / 180);

export function gesturePreset(direction: "Forward" | "Backward" | "Right" | "Left"): DriveIntent {
    const s = Math.sin(TILT);
    const c = Math.cos(TILT);
    switch (direction) {
        case "Forward":
            return { gesture: { ax: -s, ay: 0, az: c } };
        case "Backward":
            return { gesture: { ax: s, ay: 0, az: c } };
        case "Right":
            return { gesture: { ax: 0, ay: s, az: c } };
        case "Left":
            return { gesture: { ax: 0, ay: -s, az: c } };
    }
}
