// DOM wiring: renders the LiveView into the page and binds the console
// controls. All state flows through the controller; nothing here mutates
// the view directly from user input.

import { ServiceClient } from "./api.js";
import { DashboardController } from "./controller.js";
import { gesturePreset, keyToJoystick } from "./keyboard.js";
import { isLatched, isStale } from "./state.js";
import { subscribeStream } from "./stream.js";
import { LiveView } from "./types.js";

const $ = <T extends HTMLElement>(id: string): T => {
    const el = document.getElementById(id);
    if (!el) throw new Error(`missing element #${id}`);
    return el as T;
};

function drawViewport(canvas: HTMLCanvasElement, view: LiveView): void {
    const ctx = canvas.getContext("2d");
    if (!ctx) return;
    const { width, height } = canvas;
    ctx.clearRect(0, 0, width, height);
    ctx.strokeStyle = "#ccc";
    ctx.strokeRect(0, 0, width, height);
    const chair = view.chair;
    if (!chair) return;
    const scale = 30; // px per metre
    const cx = width / 2 + chair.pose[0] * scale;
    const cy = height / 2 - chair.pose[1] * scale;
    const heading = chair.pose[2];
    ctx.fillStyle = chair.latched ? "#c0392b" : "#2c3e50";
    ctx.beginPath();
    ctx.arc(cx, cy, 9, 0, 2 * Math.PI);
    ctx.fill();
    ctx.strokeStyle = ctx.fillStyle;
    ctx.lineWidth = 3;
    ctx.beginPath();
    ctx.moveTo(cx, cy);
    ctx.lineTo(cx + 16 * Math.cos(heading), cy - 16 * Math.sin(heading));
    ctx.stroke();
}

function fmt(value: number | undefined, digits = 1): string {
    return value === undefined ? "--" : value.toFixed(digits);
}

export function startDashboard(baseUrl: string = ""): DashboardController {
    const client = new ServiceClient(baseUrl || window.location.origin);
    const canvas = $<HTMLCanvasElement>("viewport");
    const statusBanner = $("status-banner");
    const connBanner = $("connection-banner");
    const latchBanner = $("latch-banner");
    const noticeBox = $("notice");
    const alertFeed = $("alert-feed");
    const modeIndicator = $("mode-indicator");

    const render = (view: LiveView): void => {
        statusBanner.textContent = view.status === "Red" ? "RED ALERT" : "GREEN — stable";
        statusBanner.className = view.status === "Red" ? "banner red" : "banner green";

        const stale = isStale(view, Date.now());
        connBanner.textContent =
            view.connection === "open" ? (stale ? "STALE — no updates > 5 s" : "live") : `connection ${view.connection}`;
        connBanner.className = view.connection === "open" && !stale ? "conn ok" : "conn bad";

        $("hr-value").textContent = fmt(view.vitals["hr"]?.value, 0);
        $("spo2-value").textContent = fmt(view.vitals["spo2"]?.value);
        $("temp-value").textContent = fmt(view.vitals["temp"]?.value);
        $("fall-value").textContent = view.vitals["fall"]?.value ? "FALL" : "ok";
        $("convulsion-value").textContent = view.vitals["convulsion"]?.value ? "CONVULSION" : "ok";

        modeIndicator.textContent = view.chair ? `${view.chair.mode} / ${view.chair.direction}` : "--";
        const latched = isLatched(view);
        latchBanner.style.display = latched ? "block" : "none";
        document.querySelectorAll<HTMLButtonElement>("button[data-drive]").forEach((b) => {
            b.disabled = latched;
        });
        ($("voice-text") as HTMLInputElement).disabled = latched;
        ($("eog-angle") as HTMLInputElement).disabled = latched;

        noticeBox.textContent = view.notice ?? "";
        noticeBox.style.display = view.notice ? "block" : "none";

        alertFeed.innerHTML = "";
        for (const alert of view.alerts.slice().reverse()) {
            const row = document.createElement("li");
            row.className = alert.acknowledged ? "alert done" : "alert active";
            row.textContent = `#${alert.id} ${alert.kind} (${alert.value}) @ ${alert.t} ms `;
            if (!alert.acknowledged) {
                const button = document.createElement("button");
                button.textContent = "acknowledge";
                button.onclick = () => void controller.acknowledge(alert.id);
                row.appendChild(button);
            }
            alertFeed.appendChild(row);
        }

        drawViewport(canvas, view);
    };

    const controller = new DashboardController(client, render);

    subscribeStream(
        `${baseUrl || window.location.origin}/stream`,
        (event) => controller.handleStreamEvent(event),
        (state) => controller.handleConnection(state),
    );

    document.addEventListener("keydown", (ev) => {
        const intent = keyToJoystick(ev.key);
        if (intent) {
            ev.preventDefault();
            void controller.drive(intent);
        }
    });

    document.querySelectorAll<HTMLButtonElement>("button[data-mode]").forEach((button) => {
        button.onclick = () => void controller.selectMode(button.dataset.mode!);
    });
    document.querySelectorAll<HTMLButtonElement>("button[data-gesture]").forEach((button) => {
        button.onclick = () =>
            void controller.drive(gesturePreset(button.dataset.gesture as Parameters<typeof gesturePreset>[0]));
    });
    $("voice-send").onclick = () => {
        const text = ($("voice-text") as HTMLInputElement).value;
        if (text.trim()) void controller.drive({ voice: text });
    };
    $("eog-dwell").onclick = () => {
        const angle = Number(($("eog-angle") as HTMLInputElement).value);
        void controller.drive({ eog_angle: angle, hold_ms: 4600 });
    };
    $("eog-blink").onclick = () => void controller.drive({ eog_blink: true });
    $("clear-safehalt").onclick = () => void controller.clearSafeHalt();

    render(controller.view);
    return controller;
}

declare global {
    interface Window {
        wheelsimDashboard?: DashboardController;
    }
}

if (typeof document !== "undefined" && document.getElementById("viewport")) {
    window.wheelsimDashboard = startDashboard();
}
