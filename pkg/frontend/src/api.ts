import type { ImageResponse, PredictResponse, WirePrompts } from "./types";

/** Thin client for the three segmentation-service endpoints. */
export class ApiClient {
  constructor(private baseUrl: string = "") {}

  async health(): Promise<{ status: string; model_hash: string }> {
    const res = await fetch(`${this.baseUrl}/v1/health`);
    if (!res.ok) throw new Error(`health check failed: ${res.status}`);
    return res.json();
  }

  async uploadImage(pngBytes: ArrayBuffer | Blob): Promise<ImageResponse> {
    const res = await fetch(`${this.baseUrl}/v1/images`, {
      method: "POST",
      headers: { "Content-Type": "image/png" },
      body: pngBytes,
    });
    if (!res.ok) throw new Error(await errorText(res));
    return res.json();
  }

  async predict(imageId: string, prompts: WirePrompts): Promise<PredictResponse> {
    const res = await fetch(`${this.baseUrl}/v1/predict`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ image_id: imageId, prompts }),
    });
    if (!res.ok) throw new Error(await errorText(res));
    return res.json();
  }
}

async function errorText(res: Response): Promise<string> {
  try {
    const body = await res.json();
    return body.error ?? `request failed: ${res.status}`;
  } catch {
    return `request failed: ${res.status}`;
  }
}
