import "./style.css";
import { ApiClient } from "./api";
import { App } from "./app";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");
void new App(root, new ApiClient()).start(location.hash);
