// Shared shapes for the monitor-service API and stream events.

export interface VitalEntry {
    value: number;
    t: number;
}

export interface AlertInfo {
    id: number;
    kind: string;
    severity: string;
    value: number;
    t: number;
    patient_id: string;
    acknowledged: boolean;
}

export interface ChairState {
    t_ms: number;
    mode: string;
    direction: string;
    speed: number;
    pose: [number, number, number];
    latched: boolean;
}

export type ConnectionState = "connecting" | "open" | "lost";

export interface LiveView {
    connection: ConnectionState;
    status: "Green" | "Red";
    patient: string | null;
    vitals: Record<string, VitalEntry>;
    lastUpdateWallMs: number | null;
    alerts: AlertInfo[];
    chair: ChairState | null;
    notice: string | null;
}

export type StreamEvent =
    | { type: "record"; patient: string; record: Record<string, unknown> }
    | { type: "alert"; alert: AlertInfo & Record<string, unknown> }
    | { type: "ack"; id: number; patient: string }
    | { type: "status"; patient: string; color: "Green" | "Red" }
    | { type: "chair"; t_ms: number; mode: string; direction: string; speed: number; pose: [number, number, number]; latched: boolean };

export type DriveIntent =
    | { joystick: { x_counts: number; y_counts: number; pressed?: boolean }; hold_ms?: number }
    | { voice: string; hold_ms?: number }
    | { gesture: { ax: number; ay: number; az: number }; hold_ms?: number }
    | { eog_angle: number; hold_ms?: number }
    | { eog_blink: true };

export const STALE_AFTER_MS = 5000;
