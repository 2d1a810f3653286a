// Stream-event reducer: the LiveView is updated ONLY from server events,
// never from local drive requests, so the mode/pose shown is always the
// arbitration outcome echoed by the service.

import { AlertInfo, ChairState, LiveView, StreamEvent, STALE_AFTER_MS } from "./types.js";

export function initialView(): LiveView {
    return {
        connection: "connecting",
        status: "Green",
        patient: null,
        vitals: {},
        lastUpdateWallMs: null,
        alerts: [],
        chair: null,
        notice: null,
    };
}

function insertAlert(alerts: AlertInfo[], incoming: AlertInfo): AlertInfo[] {
    if (alerts.some((a) => a.id === incoming.id)) {
        // reconnect replays must not duplicate or reorder the feed
        return alerts.map((a) => (a.id === incoming.id ? { ...a, ...incoming } : a));
    }
    const next = [...alerts, incoming];
    next.sort((a, b) => (a.t - b.t) || (a.id - b.id));
    return next;
}

export function applyEvent(view: LiveView, event: StreamEvent, nowWallMs: number): LiveView {
    switch (event.type) {
        case "record": {
            const record = event.record as Record<string, number | string>;
            const vitals = { ...view.vitals };
            const t = Number(record["t"]);
            for (const kind of ["hr", "spo2", "temp", "fall", "convulsion"]) {
                if (record[kind] !== undefined) {
                    vitals[kind] = { value: Number(record[kind]), t };
                }
            }
            return { ...view, patient: event.patient, vitals, lastUpdateWallMs: nowWallMs };
        }
        case "alert": {
            const incoming: AlertInfo = {
                id: event.alert.id,
                kind: event.alert.kind,
                severity: event.alert.severity,
                value: Number(event.alert.value),
                t: Number(event.alert.t),
                patient_id: String(event.alert.patient_id),
                acknowledged: Boolean(event.alert.acknowledged),
            };
            return { ...view, alerts: insertAlert(view.alerts, incoming), lastUpdateWallMs: nowWallMs };
        }
        case "ack": {
            const alerts = view.alerts.map((a) => (a.id === event.id ? { ...a, acknowledged: true } : a));
            return { ...view, alerts };
        }
        case "status":
            return { ...view, status: event.color, lastUpdateWallMs: nowWallMs };
        case "chair": {
            const chair: ChairState = {
                t_ms: event.t_ms,
                mode: event.mode,
                direction: event.direction,
                speed: event.speed,
                pose: event.pose,
                latched: event.latched,
            };
            return { ...view, chair, lastUpdateWallMs: nowWallMs };
        }
        default:
            return view;
    }
}

export function setConnection(view: LiveView, connection: LiveView["connection"]): LiveView {
    return { ...view, connection };
}

export function setNotice(view: LiveView, notice: string | null): LiveView {
    return { ...view, notice };
}

export function isStale(view: LiveView, nowWallMs: number): boolean {
    if (view.connection !== "open") return true;
    if (view.lastUpdateWallMs === null) return false;
    return nowWallMs - view.lastUpdateWallMs > STALE_AFTER_MS;
}

export function isLatched(view: LiveView): boolean {
    return view.chair?.latched ?? false;
}

export function activeAlerts(view: LiveView): AlertInfo[] {
    return view.alerts.filter((a) => !a.acknowledged);
}
