import { CalibrationClient } from "./api";
import { ExplorerApp } from "./app";
import "./styles.css";

const root = document.getElementById("app");
if (root === null) {
  throw new Error("missing #app mount point");
}
const app = new ExplorerApp(root, new CalibrationClient());
app.render();
void app.loadProductionPreset();
