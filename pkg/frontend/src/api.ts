// Thin client over the monitor-service HTTP API. All mutations report
// refusals as values (not throws) so the UI can surface them inline.

import { AlertInfo, DriveIntent } from "./types.js";

export interface ActionResult {
    ok: boolean;
    notice?: string;
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceClient {
    constructor(
        private readonly baseUrl: string,
        private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
    ) {}

    private async post(path: string, body?: unknown): Promise<ActionResult> {
        let response: Response;
        try {
            response = await this.fetchFn(`${this.baseUrl}${path}`, {
                method: "POST",
                headers: body === undefined ? undefined : { "Content-Type": "application/json" },
                body: body === undefined ? undefined : JSON.stringify(body),
            });
        } catch (err) {
            return { ok: false, notice: `service unreachable: ${String(err)}` };
        }
        if (response.ok) {
            return { ok: true };
        }
        let detail = `${response.status}`;
        try {
            const payload = (await response.json()) as { detail?: string };
            if (payload.detail) detail = payload.detail;
        } catch {
            // non-JSON error body: keep the status code
        }
        return { ok: false, notice: detail };
    }

    drive(intent: DriveIntent): Promise<ActionResult> {
        return this.post("/drive", intent);
    }

    setMode(mode: string): Promise<ActionResult> {
        return this.post("/mode", { mode });
    }

    acknowledge(id: number): Promise<ActionResult> {
        return this.post(`/alerts/${id}/ack`);
    }

    clearSafeHalt(): Promise<ActionResult> {
        return this.post("/safehalt/clear");
    }

    async alerts(activeOnly = false): Promise<AlertInfo[]> {
        const response = await this.fetchFn(`${this.baseUrl}/alerts?active=${activeOnly}`);
        return (await response.json()) as AlertInfo[];
    }

    async latest(patient: string): Promise<Record<string, unknown> | null> {
        const response = await this.fetchFn(`${this.baseUrl}/patients/${patient}/latest`);
        if (!response.ok) return null;
        return (await response.json()) as Record<string, unknown>;
    }
}
